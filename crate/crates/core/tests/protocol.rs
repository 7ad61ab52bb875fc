use ssmlab::constructions::build_composition_ssm;
use ssmlab::protocol::{
    compile_ssm_forward_protocol, min_one_round_cc, partition_stream, run_forward_protocol, serialize_two_party,
    validate_causality, validate_two_party, Party, ProtocolSetup, ProtocolSummary,
};
use ssmlab::random::{random_machine, seeded, MachineShape};
use ssmlab::task::{instances, pc_to_composition, random_instance, random_map, InstanceMode, PCInstance};
use ssmlab::{AffineMap, Budget};

use rand::Rng;

#[test]
fn compiled_protocol_matches_the_composition_machine() {
    for n in 1..=3 {
        for k in 1..=4 {
            let machine = build_composition_ssm(n, k).unwrap();
            let c = AffineMap::serialized_bits(1, machine.precision());
            let mode = if n.pow((n * k + 1) as u32) <= 20_000 {
                InstanceMode::Exhaustive
            } else {
                InstanceMode::Random { seed: 1, count: 2000 }
            };
            for inst in instances(n, k, mode, Budget::DEFAULT).unwrap() {
                let stream = inst.encode_row_major().to_data_tokens();
                let trace = machine.run(&stream).unwrap();
                let tr = compile_ssm_forward_protocol(&machine, &inst).unwrap();
                assert_eq!(&tr.output, trace.final_output());
                assert!(tr.all_messages().all(|m| m.bit_count() == c));
                assert_eq!(tr.message_count(), (k - 1) * (k + 1));
                // Reconstructed incoming states equal the trace.
                for (l, round) in tr.incoming.iter().enumerate() {
                    for (i, h) in round.iter().enumerate() {
                        let start = tr.setup.intervals[i].start;
                        assert_eq!(h, trace.state(l + 1, start - 1));
                    }
                }
                assert!(validate_causality(&machine, &tr).unwrap().is_valid());
                assert!(ProtocolSummary::new(&inst, &tr).matches);
            }
        }
    }
}

#[test]
fn compiled_protocol_matches_random_machines() {
    let mut rng = seeded(42);
    for _ in 0..100 {
        let shape = MachineShape {
            layers: rng.gen_range(1..=3),
            dim: rng.gen_range(1..=2),
            bits: rng.gen_range(1..=3),
            width: 1,
            state_only_top: false,
        };
        let machine = random_machine(&mut rng, shape).unwrap();
        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let inst = random_instance(&mut rng, n, k);
        let stream = inst.encode_row_major().to_data_tokens();
        let tr = compile_ssm_forward_protocol(&machine, &inst).unwrap();
        assert_eq!(tr.output, machine.run_output(&stream).unwrap());
        let c = (shape.dim * shape.dim + shape.dim) * shape.bits as usize;
        assert!(tr.all_messages().all(|m| m.bit_count() == c));
        assert!(validate_causality(&machine, &tr).unwrap().is_valid());
    }
}

#[test]
fn arbitrary_partitions_are_supported() {
    let mut rng = seeded(7);
    let shape = MachineShape {
        layers: 2,
        dim: 2,
        bits: 2,
        width: 2,
        state_only_top: false,
    };
    let machine = random_machine(&mut rng, shape).unwrap();
    let stream = ssmlab::random::random_stream(&mut rng, machine.alphabet(), 10);
    let cuts = [0usize, 1, 4, 9, 10];
    let intervals = cuts
        .windows(2)
        .map(|w| ssmlab::protocol::Interval {
            start: w[0] + 1,
            end: w[1],
        })
        .collect();
    let tr = run_forward_protocol(&machine, ProtocolSetup::new(&stream, intervals).unwrap()).unwrap();
    assert_eq!(tr.output, machine.run_output(&stream).unwrap());
    assert_eq!(tr.max_message_bits(), 12);
}

#[test]
fn serialization_follows_the_alternating_schedule() {
    let mut rng = seeded(9);
    for l in 1..=5usize {
        let k = l + 3;
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let pc = PCInstance::new(n, random_map(&mut rng, n), random_map(&mut rng, n), k).unwrap();
            let inst = pc.to_composition().unwrap();
            let shape = MachineShape {
                layers: l,
                dim: 1,
                bits: 3,
                width: 1,
                state_only_top: false,
            };
            let machine = random_machine(&mut rng, shape).unwrap();
            let stream = inst.encode_row_major();
            let setup = ProtocolSetup::new(&stream.to_data_tokens(), partition_stream(&stream).unwrap()).unwrap();
            let tr = run_forward_protocol(&machine, setup).unwrap();
            let tp = serialize_two_party(&tr).unwrap();
            assert!(tp.message_count() <= l + 1);
            assert_eq!(tp.last_speaker(), Some(if l % 2 == 0 { Party::Alice } else { Party::Bob }));
            for (j, m) in tp.messages.iter().enumerate() {
                let j = j + 1;
                let rounds: Vec<usize> = if j == 1 { vec![1] } else { vec![j - 1, j] };
                assert!(m.components.iter().all(|c| rounds.contains(&c.round) && c.round <= l));
                assert!(m.components.iter().all(|c| Party::of_player(c.sender) == m.speaker));
            }
            assert!(validate_two_party(&machine, &tp).unwrap().is_valid());
        }
    }
}

#[test]
fn appended_bit_is_the_pointer_chasing_parity() {
    let mut rng = seeded(10);
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=6);
        let pc = PCInstance::new(n, random_map(&mut rng, n), random_map(&mut rng, n), k).unwrap();
        let inst = pc_to_composition(pc.alice(), pc.bob(), k).unwrap();
        let machine = build_composition_ssm(n, k).unwrap();
        let tr = compile_ssm_forward_protocol(&machine, &inst).unwrap();
        let tp = serialize_two_party(&tr).unwrap();
        assert_eq!(tp.output_bit, pc.eval().1);
        assert_eq!(tp.messages.last().unwrap().output_bit, Some(pc.eval().1));
        let c = tr.max_message_bits();
        assert!(tp.total_bits() <= (tr.layers + 1) * k * c.max(1));
        assert!(validate_two_party(&machine, &tp).unwrap().is_valid());
    }
}

#[test]
fn one_round_cost_is_monotone_in_domain() {
    let b = Budget::DEFAULT;
    assert_eq!(min_one_round_cc(1, 1, b).unwrap(), 0);
    assert_eq!(min_one_round_cc(2, 1, b).unwrap(), 1);
    let two = min_one_round_cc(2, 2, b).unwrap();
    let three = min_one_round_cc(3, 2, b).unwrap();
    assert!(two <= three);
}

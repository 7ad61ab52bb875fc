use ssmlab::constructions::{
    build_composition_ssm, mod_counter_machine, mod_counter_stream, streaming_composition_alg,
    streaming_composition_bits, universal_affine_machine, universal_stream,
};
use ssmlab::ring::{enumerate_affine_maps, StateSpace};
use ssmlab::task::{instances, InstanceMode};
use ssmlab::{Budget, CompositionInstance, Precision, RunTrace, Token};

/// `h[i+1,t] = v_i` for `t ≥ e_i` and `0` for `t < s_i`; exactly one
/// nonzero output of layer `i` inside block `i`, equal to `v_i`.
fn check_invariants(inst: &CompositionInstance, trace: &RunTrace) {
    let stream = inst.encode_row_major();
    let chain = inst.chain();
    for i in 0..=inst.functions() {
        let end = if i == 0 { 1 } else { stream.block_end(i) };
        for t in end..=stream.len() {
            assert_eq!(trace.state(i + 1, t).values(), &[chain[i] as u64], "layer {} t {t}", i + 1);
        }
        if i >= 1 {
            for t in 0..stream.block_start(i) {
                assert!(trace.state(i + 1, t).is_zero(), "layer {} t {t}", i + 1);
            }
            let nonzero: Vec<usize> = (stream.block_start(i)..=stream.block_end(i))
                .filter(|&t| trace.output(i, t).payload[0] != 0)
                .collect();
            assert_eq!(nonzero.len(), 1, "block {i} of {inst:?}");
            assert_eq!(trace.output(i, nonzero[0]).payload[0], chain[i] as u64);
            assert_eq!(nonzero[0] - stream.block_start(i) + 1, chain[i - 1]);
        }
    }
}

#[test]
fn composition_machine_is_exact_on_small_domains() {
    for n in 1..=3 {
        for k in 1..=3 {
            let machine = build_composition_ssm(n, k).unwrap();
            for inst in instances(n, k, InstanceMode::Exhaustive, Budget::DEFAULT).unwrap() {
                let trace = machine.run(&inst.encode_row_major().to_data_tokens()).unwrap();
                assert_eq!(trace.final_output(), &Token::scalar(inst.eval() as u64));
                check_invariants(&inst, &trace);
            }
        }
    }
}

#[test]
fn composition_machine_is_exact_on_random_large_instances() {
    let machine = build_composition_ssm(64, 6).unwrap();
    let mode = InstanceMode::Random { seed: 5, count: 200 };
    for inst in instances(64, 6, mode, Budget::DEFAULT).unwrap() {
        let trace = machine.run(&inst.encode_row_major().to_data_tokens()).unwrap();
        assert_eq!(trace.final_output(), &Token::scalar(inst.eval() as u64));
        check_invariants(&inst, &trace);
        assert_eq!(trace.find_recurrence_violation(&machine).unwrap(), None);
    }
}

#[test]
fn identity_tables_return_the_start() {
    for (n, k) in [(1, 4), (5, 3), (9, 2)] {
        let machine = build_composition_ssm(n, k).unwrap();
        let alg = streaming_composition_alg(n, k).unwrap();
        for a in 1..=n {
            let inst = CompositionInstance::new(n, a, vec![(1..=n).collect(); k]).unwrap();
            let stream = inst.encode_row_major().to_data_tokens();
            assert_eq!(machine.run_output(&stream).unwrap(), Token::scalar(a as u64));
            assert_eq!(alg.run(&stream).unwrap(), Token::scalar(a as u64));
        }
    }
}

#[test]
fn streaming_algorithm_is_exact_on_small_domains() {
    for n in 1..=3 {
        for k in 1..=3 {
            let alg = streaming_composition_alg(n, k).unwrap();
            assert_eq!(alg.state_bits(), streaming_composition_bits(n));
            for inst in instances(n, k, InstanceMode::Exhaustive, Budget::DEFAULT).unwrap() {
                let out = alg.run(&inst.encode_row_major().to_data_tokens()).unwrap();
                assert_eq!(out, Token::scalar(inst.eval() as u64));
            }
        }
    }
    for n in [4, 7, 15, 16] {
        let alg = streaming_composition_alg(n, 4).unwrap();
        let mode = InstanceMode::Random { seed: n as u64, count: 300 };
        for inst in instances(n, 4, mode, Budget::DEFAULT).unwrap() {
            let out = alg.run(&inst.encode_row_major().to_data_tokens()).unwrap();
            assert_eq!(out, Token::scalar(inst.eval() as u64));
        }
    }
}

#[test]
fn universal_machine_matches_direct_application() {
    for (w, p) in [(1, 1), (1, 2), (2, 1)] {
        let precision = Precision::new(p).unwrap();
        let machine = universal_affine_machine(w, p).unwrap();
        for map in enumerate_affine_maps(w, precision, Budget::DEFAULT).unwrap() {
            for x in StateSpace::new(w, precision, Budget::DEFAULT).unwrap() {
                let out = machine.run_output(&universal_stream(&x, &map).unwrap()).unwrap();
                assert_eq!(&out.payload[..w], map.apply(&x).unwrap().values());
                assert!(out.payload[w..].iter().all(|&v| v == 0));
            }
        }
    }
}

#[test]
fn counter_wraps_after_eight_increments() {
    let m = mod_counter_machine();
    for s in 0..8u64 {
        let trace = m.run(&mod_counter_stream(s, 16)).unwrap();
        for t in 1..=17 {
            assert_eq!(trace.output(1, t).payload[0], (s + t as u64 - 1) % 8);
        }
    }
}

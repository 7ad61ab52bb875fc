//! Acceptance gate: one PASS/FAIL line per criterion. Oracles here are
//! written independently of the library wherever the check allows it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::{Duration, Instant};

use rand::Rng;
use ssmlab::constructions::{build_composition_ssm, streaming_composition_alg};
use ssmlab::cot::{
    offline_protocol_compile, run_cot, ssm_to_streaming, streaming_to_cot_ssm, width_precision_roundtrip, CoTMachine,
    CoTMode,
};
use ssmlab::protocol::{
    compile_ssm_forward_protocol, partition_stream, run_forward_protocol, serialize_two_party, validate_causality,
    validate_two_party, Party, ProtocolSetup,
};
use ssmlab::random::{random_cot_machine, random_machine, random_stream, seeded, MachineShape};
use ssmlab::verify::{matrix_order_spectrum, verify_affine_counting, verify_no_order8};
use ssmlab::{Budget, CompositionInstance, RunTrace, SSMachine, Token};

type Outcome = Result<String, String>;

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn lib<T>(r: ssmlab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn bits_for(n: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < n {
        b += 1;
    }
    b
}

// Composition oracle: a start point and K tables over [N].

#[derive(Clone, Debug)]
struct Inst {
    n: usize,
    a: usize,
    tables: Vec<Vec<usize>>,
}

impl Inst {
    fn chain(&self) -> Vec<usize> {
        let mut v = vec![self.a];
        for f in &self.tables {
            v.push(f[v.last().unwrap() - 1]);
        }
        v
    }

    fn answer(&self) -> usize {
        *self.chain().last().unwrap()
    }

    fn tokens(&self) -> Vec<Token> {
        std::iter::once(self.a)
            .chain(self.tables.iter().flatten().copied())
            .map(|v| Token::scalar(v as u64))
            .collect()
    }

    fn library(&self) -> CompositionInstance {
        CompositionInstance::new(self.n, self.a, self.tables.clone()).unwrap()
    }
}

fn all_instances(n: usize, k: usize) -> Vec<Inst> {
    let digits = n * k + 1;
    let total = n.pow(digits as u32);
    (0..total)
        .map(|mut idx| {
            let mut d: Vec<usize> = (0..digits)
                .map(|_| {
                    let x = idx % n + 1;
                    idx /= n;
                    x
                })
                .collect();
            let a = d.remove(0);
            Inst {
                n,
                a,
                tables: d.chunks(n).map(<[usize]>::to_vec).collect(),
            }
        })
        .collect()
}

fn random_inst<R: Rng>(rng: &mut R, n: usize, k: usize) -> Inst {
    Inst {
        n,
        a: rng.gen_range(1..=n),
        tables: (0..k).map(|_| (0..n).map(|_| rng.gen_range(1..=n)).collect()).collect(),
    }
}

/// Block `i ≥ 1` occupies positions `2 + (i-1)N ..= 1 + iN`; block 0 is `a`.
fn block(n: usize, i: usize) -> (usize, usize) {
    if i == 0 {
        (1, 1)
    } else {
        (2 + (i - 1) * n, 1 + i * n)
    }
}

fn invariant_holds(inst: &Inst, trace: &RunTrace) -> bool {
    let chain = inst.chain();
    let len = 1 + inst.n * inst.tables.len();
    (0..=inst.tables.len()).all(|i| {
        let (_, e) = block(inst.n, i);
        (e..=len).all(|t| trace.state(i + 1, t).values() == [chain[i] as u64])
    })
}

struct SmallRuns {
    cases: Vec<(Inst, usize)>,
}

fn small_grid() -> Vec<(usize, usize)> {
    (1..=3).flat_map(|n| (1..=3).map(move |k| (n, k))).collect()
}

fn criterion_instances() -> SmallRuns {
    let mut cases = Vec::new();
    for (n, k) in small_grid() {
        cases.extend(all_instances(n, k).into_iter().map(|i| (i, k)));
    }
    let mut rng = seeded(0xacce);
    cases.extend((0..500).map(|_| (random_inst(&mut rng, 64, 6), 6)));
    SmallRuns { cases }
}

fn machines_for(runs: &SmallRuns) -> BTreeMap<(usize, usize), SSMachine> {
    runs.cases
        .iter()
        .map(|(i, k)| (i.n, *k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|(n, k)| ((n, k), build_composition_ssm(n, k).unwrap()))
        .collect()
}

fn c1_c2(runs: &SmallRuns) -> (Outcome, Outcome) {
    let start = Instant::now();
    let machines = machines_for(runs);
    let mut wrong = 0;
    let mut broken = 0;
    for (inst, k) in &runs.cases {
        let machine = &machines[&(inst.n, *k)];
        let trace = match machine.run(&inst.tokens()) {
            Ok(t) => t,
            Err(e) => return (Err(e.to_string()), Err("no trace".into())),
        };
        wrong += (trace.final_output() != &Token::scalar(inst.answer() as u64)) as usize;
        broken += !invariant_holds(inst, &trace) as usize;
    }
    let elapsed = start.elapsed();
    let n = runs.cases.len();
    let c1 = if wrong == 0 && elapsed < Duration::from_secs(120) {
        Ok(format!("{n} instances exact in {}", secs(elapsed)))
    } else {
        Err(format!("{wrong} of {n} wrong, {}", secs(elapsed)))
    };
    let c2 = if broken == 0 {
        Ok(format!("h[i+1,t] = v_i on all {n} traces"))
    } else {
        Err(format!("{broken} traces break the invariant"))
    };
    (c1, c2)
}

fn c3(runs: &SmallRuns) -> Outcome {
    let start = Instant::now();
    let machines = machines_for(runs);
    for (inst, k) in &runs.cases {
        let machine = &machines[&(inst.n, *k)];
        let tr = lib(compile_ssm_forward_protocol(machine, &inst.library()))?;
        let p = bits_for(inst.n + 1) + 1;
        ensure(tr.output == Token::scalar(inst.answer() as u64), || format!("{inst:?}: wrong output"))?;
        ensure(tr.all_messages().all(|m| m.bit_count() == 2 * p), || format!("{inst:?}: message size"))?;
        ensure(lib(validate_causality(machine, &tr))?.is_valid(), || format!("{inst:?}: causality"))?;
    }
    let mut rng = seeded(0xc3);
    for j in 0..200 {
        let shape = MachineShape {
            layers: rng.gen_range(1..=3),
            dim: rng.gen_range(1..=2),
            bits: rng.gen_range(1..=3),
            width: 1,
            state_only_top: false,
        };
        let machine = lib(random_machine(&mut rng, shape))?;
        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let inst = random_inst(&mut rng, n, k);
        let tr = lib(compile_ssm_forward_protocol(&machine, &inst.library()))?;
        let direct = lib(machine.run_output(&inst.tokens()))?;
        let (d, p) = (shape.dim, shape.bits as usize);
        ensure(tr.output == direct, || format!("machine {j}: output"))?;
        ensure(tr.all_messages().all(|m| m.bit_count() == (d * d + d) * p), || {
            format!("machine {j}: message size")
        })?;
        ensure(lib(validate_causality(&machine, &tr))?.is_valid(), || format!("machine {j}: causality"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {}", secs(elapsed)))?;
    Ok(format!(
        "{} composition instances and 200 random machines in {}",
        runs.cases.len(),
        secs(elapsed)
    ))
}

fn pc_oracle(fa: &[usize], fb: &[usize], k: usize) -> u8 {
    let mut pt = 1;
    for step in 1..=k {
        pt = if step % 2 == 1 { fa[pt - 1] } else { fb[pt - 1] };
    }
    (pt % 2) as u8
}

fn c4() -> Outcome {
    let mut rng = seeded(0xc4);
    let mut checked = 0;
    for l in 1..=5usize {
        let k = l + 3;
        for _ in 0..10 {
            let n = rng.gen_range(2..=8);
            let fa: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=n)).collect();
            let fb: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=n)).collect();
            let tables = (1..=k).map(|i| if i % 2 == 1 { fa.clone() } else { fb.clone() }).collect();
            let inst = lib(CompositionInstance::new(n, 1, tables))?;
            let shape = MachineShape {
                layers: l,
                dim: 1,
                bits: 3,
                width: 1,
                state_only_top: false,
            };
            let machine = lib(random_machine(&mut rng, shape))?;
            let stream = inst.encode_row_major();
            let setup = lib(ProtocolSetup::new(&stream.to_data_tokens(), lib(partition_stream(&stream))?))?;
            let tp = lib(serialize_two_party(&lib(run_forward_protocol(&machine, setup))?))?;
            let spoken: Vec<_> = tp.messages.iter().filter(|m| !m.padding).collect();
            ensure(spoken.len() <= l + 1, || format!("L={l}: {} messages", spoken.len()))?;
            for (j, m) in spoken.iter().enumerate() {
                // Message j+1 is spoken by Alice iff j+1 is odd and carries
                // round 1 alone (j = 0) or rounds j and j+1.
                let speaker = if j % 2 == 0 { Party::Alice } else { Party::Bob };
                ensure(m.speaker == speaker, || format!("L={l}: message {} speaker", j + 1))?;
                let rounds: &[usize] = if j == 0 { &[1] } else { &[j, j + 1] };
                ensure(
                    m.components.iter().all(|c| rounds.contains(&c.round) && c.round <= l),
                    || format!("L={l}: message {} rounds", j + 1),
                )?;
                // Alice holds odd-indexed players.
                ensure(
                    m.components.iter().all(|c| (c.sender % 2 == 1) == (m.speaker == Party::Alice)),
                    || format!("L={l}: message {} sender", j + 1),
                )?;
            }
            let last = if (l + 1) % 2 == 1 { Party::Alice } else { Party::Bob };
            ensure(tp.last_speaker() == Some(last), || format!("L={l}: last speaker"))?;
            ensure(lib(validate_two_party(&machine, &tp))?.is_valid(), || format!("L={l}: causality"))?;
            checked += 1;
        }
    }
    for j in 0..100 {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=6);
        let fa: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=n)).collect();
        let fb: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=n)).collect();
        let tables = (1..=k).map(|i| if i % 2 == 1 { fa.clone() } else { fb.clone() }).collect();
        let inst = lib(CompositionInstance::new(n, 1, tables))?;
        let machine = lib(build_composition_ssm(n, k))?;
        let tp = lib(serialize_two_party(&lib(compile_ssm_forward_protocol(&machine, &inst))?))?;
        ensure(tp.output_bit == pc_oracle(&fa, &fb, k), || format!("PC instance {j}: parity"))?;
    }
    Ok(format!("{checked} schedules for L=1..5, 100 parity bits"))
}

fn small_shape<R: Rng>(rng: &mut R) -> MachineShape {
    MachineShape {
        layers: rng.gen_range(1..=2),
        dim: rng.gen_range(1..=2),
        bits: rng.gen_range(1..=3),
        width: rng.gen_range(1..=2),
        state_only_top: rng.gen_bool(0.5),
    }
}

fn c5() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(0xc5);
    let max_len = 10;
    for j in 0..20 {
        let shape = small_shape(&mut rng);
        let thoughts = 2;
        let machine = lib(random_cot_machine(&mut rng, shape, CoTMode::Online, thoughts))?;
        let (alg, account) = lib(ssm_to_streaming(&machine, max_len * (1 + thoughts)))?;
        let compiled = lib(streaming_to_cot_ssm(&alg, 2, account.total.div_ceil(2) as u32))?;
        let plain = CoTMachine::plain(machine.base.clone());
        for _ in 0..100 {
            let len = rng.gen_range(1..=max_len);
            let stream = random_stream(&mut rng, machine.base.alphabet(), len);
            let direct = lib(run_cot(&machine, &stream))?.output;
            ensure(lib(alg.run(&stream))? == direct, || format!("machine {j}: streaming"))?;
            let (out, rec) = lib(compiled.run(&stream))?;
            ensure(out == direct, || format!("machine {j}: recompiled"))?;
            ensure(rec.thoughts.iter().all(|&k| k == 1) && rec.steps() == 2 * len, || {
                format!("machine {j}: thought count")
            })?;
            // Without thoughts the chain-of-thought run is the plain run.
            let base = lib(machine.base.run_output(&stream))?;
            ensure(lib(run_cot(&plain, &stream))?.output == base, || format!("machine {j}: null policy"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {}", secs(elapsed)))?;
    Ok(format!("20 machines x 100 streams in {}", secs(elapsed)))
}

fn c6() -> Outcome {
    let mut total = 0;
    for (n, k) in small_grid() {
        let alg = lib(streaming_composition_alg(n, k))?;
        let s = 2 * bits_for(n + 1);
        ensure(alg.state_bits() == s, || format!("N={n}: {} state bits", alg.state_bits()))?;
        let compiled = lib(streaming_to_cot_ssm(&alg, 1, s as u32))?;
        ensure(compiled.machine.base.layer_count() == 1, || "more than one layer".into())?;
        for inst in all_instances(n, k) {
            let (out, _) = lib(compiled.run(&inst.tokens()))?;
            ensure(out == Token::scalar(inst.answer() as u64), || format!("{inst:?}"))?;
            total += 1;
        }
    }
    Ok(format!("{total} instances exact with 2*ceil(log2(N+1)) state bits"))
}

fn c7() -> Outcome {
    let mut rng = seeded(0xc7);
    for j in 0..100 {
        let shape = MachineShape {
            layers: rng.gen_range(1..=3),
            dim: rng.gen_range(1..=2),
            bits: rng.gen_range(1..=3),
            width: 1,
            state_only_top: false,
        };
        let machine = lib(random_cot_machine(&mut rng, shape, CoTMode::Offline, 4))?;
        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let inst = random_inst(&mut rng, n, k);
        let run = lib(offline_protocol_compile(&machine, &inst.library()))?;
        let null = lib(compile_ssm_forward_protocol(&machine.base, &inst.library()))?;
        ensure(run.transcript == null, || format!("machine {j}: transcript differs"))?;
        ensure(
            run.transcript.to_json() == null.to_json(),
            || format!("machine {j}: serialized transcript differs"),
        )?;
        ensure(run.output == lib(run_cot(&machine, &inst.tokens()))?.output, || {
            format!("machine {j}: output")
        })?;
    }
    Ok("100 offline machines".into())
}

// Independent F₂³ enumeration: matrices as 9-bit masks, row r in bits 3r..3r+2.

fn gf2_apply(m: u16, b: u8, x: u8) -> u8 {
    let mut y = 0;
    for r in 0..3 {
        let row = ((m >> (3 * r)) & 7) as u8;
        y |= (((row & x).count_ones() & 1) as u8) << r;
    }
    y ^ b
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Order of `x ↦ Mx + b` as a permutation of F₂³, if it is one.
fn perm_order(m: u16, b: u8) -> Option<u64> {
    let image: Vec<u8> = (0..8).map(|x| gf2_apply(m, b, x)).collect();
    if image.iter().collect::<HashSet<_>>().len() != 8 {
        return None;
    }
    let mut seen = [false; 8];
    let mut order = 1;
    for s in 0..8 {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            x = image[x] as usize;
            len += 1;
        }
        order = order / gcd(order, len) * len;
    }
    Some(order)
}

fn c8() -> Outcome {
    let start = Instant::now();
    let mut orders = BTreeMap::new();
    let mut gl = BTreeSet::new();
    for m in 0..512u16 {
        if let Some(o) = perm_order(m, 0) {
            gl.insert(o);
        }
        for b in 0..8u8 {
            if let Some(o) = perm_order(m, b) {
                *orders.entry(o).or_insert(0u64) += 1;
            }
        }
    }
    let total: u64 = orders.values().sum();
    let allowed: BTreeSet<u64> = [1, 2, 3, 4, 6, 7, 14].into();
    ensure(total == 1344, || format!("{total} affine permutations"))?;
    ensure(!orders.contains_key(&8), || "order 8 present".into())?;
    ensure(orders.keys().all(|o| allowed.contains(o)), || format!("support {:?}", orders.keys()))?;
    ensure(gl == BTreeSet::from([1, 2, 3, 4, 7]), || format!("GL spectrum {gl:?}"))?;
    let report = lib(verify_no_order8())?;
    ensure(report.histogram == orders, || "library histogram differs".into())?;
    ensure(lib(matrix_order_spectrum(3, 1, Budget::DEFAULT))? == gl, || "library spectrum differs".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {}", secs(elapsed)))?;
    Ok(format!("histogram {orders:?}, GL(3,2) spectrum {gl:?} in {}", secs(elapsed)))
}

/// Distinct functions of `h ↦ A·h + b` on `(ℤ/2ᵖ)ʷ` and of `x ↦ a·x + c` on `ℤ/2^{pw}`.
fn count_functions(w: usize, p: u32) -> (usize, usize) {
    let q = 1u64 << p;
    let params = w * w + w;
    let points: Vec<Vec<u64>> = (0..q.pow(w as u32))
        .map(|mut i| {
            (0..w)
                .map(|_| {
                    let v = i % q;
                    i /= q;
                    v
                })
                .collect()
        })
        .collect();
    let mut wide = HashSet::new();
    for mut code in 0..q.pow(params as u32) {
        let theta: Vec<u64> = (0..params)
            .map(|_| {
                let v = code % q;
                code /= q;
                v
            })
            .collect();
        let table: Vec<Vec<u64>> = points
            .iter()
            .map(|h| {
                (0..w)
                    .map(|r| {
                        let dot: u64 = (0..w).map(|c| theta[r * w + c] * h[c]).sum();
                        (dot + theta[w * w + r]) % q
                    })
                    .collect()
            })
            .collect();
        wide.insert(table);
    }
    let big = 1u64 << (p as usize * w);
    let mut narrow = HashSet::new();
    for a in 0..big {
        for c in 0..big {
            narrow.insert((0..big).map(|x| (a * x + c) % big).collect::<Vec<_>>());
        }
    }
    (wide.len(), narrow.len())
}

fn c9() -> Outcome {
    let mut lines = Vec::new();
    for (w, p, expect) in [(1, 1, Some((4, 4))), (2, 1, Some((64, 16))), (3, 1, Some((4096, 64))), (2, 2, None)] {
        let (wide, narrow) = count_functions(w, p);
        if let Some(e) = expect {
            ensure((wide, narrow) == e, || format!("(w,p)=({w},{p}): {wide} vs {narrow}"))?;
        }
        if w == 1 {
            ensure(wide == narrow, || format!("(1,{p}) not equal"))?;
        } else {
            ensure(wide > narrow, || format!("(w,p)=({w},{p}) not strict"))?;
        }
        let r = lib(verify_affine_counting(w, p, Budget::DEFAULT))?;
        ensure(
            r.wide_functions == wide as u128 && r.narrow_functions == narrow as u128,
            || format!("library counts differ at ({w},{p})"),
        )?;
        lines.push(format!("({w},{p}): {wide} vs {narrow}"));
    }
    Ok(lines.join(", "))
}

fn c10() -> Outcome {
    let mut rng = seeded(0xc10);
    let max_len = 8;
    let mut widths = BTreeSet::new();
    for j in 0..20 {
        let shape = MachineShape {
            layers: rng.gen_range(1..=3),
            dim: rng.gen_range(1..=3),
            bits: rng.gen_range(1..=3),
            width: rng.gen_range(1..=2),
            state_only_top: true,
        };
        let thoughts = 2;
        let machine = lib(random_cot_machine(&mut rng, shape, CoTMode::Online, thoughts))?;
        let horizon = max_len * (1 + thoughts);
        let rt = lib(width_precision_roundtrip(&machine, horizon))?;
        let p_prime = rt.compiled.machine.base.precision().bits() as usize;
        let expected = shape.layers * shape.dim * shape.bits as usize + bits_for(horizon + 1);
        ensure(rt.compiled.machine.base.dim() == 1, || format!("machine {j}: not width 1"))?;
        ensure(p_prime == expected, || format!("machine {j}: p' = {p_prime}, expected {expected}"))?;
        widths.insert(p_prime);
        for _ in 0..50 {
            let len = rng.gen_range(1..=max_len);
            let stream = random_stream(&mut rng, machine.base.alphabet(), len);
            let direct = lib(run_cot(&machine, &stream))?.output;
            ensure(lib(rt.run(&stream))? == direct, || format!("machine {j}: output differs"))?;
        }
    }
    Ok(format!("1000/1000 equal, p' values {widths:?}"))
}

fn c11() -> Outcome {
    let mut reports = Vec::new();
    for _ in 0..2 {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = ssmlab_cli::run(["ssmlab", "--seed", "17", "verify", "all"], None, &mut out, &mut err);
        ensure(code == 0, || format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
        reports.push(out);
    }
    ensure(reports[0] == reports[1], || "reports differ".into())?;
    Ok(format!("two runs, {} identical bytes", reports[0].len()))
}

fn main() {
    let runs = criterion_instances();
    let (c1, c2) = c1_c2(&runs);
    let results: Vec<(&str, Outcome)> = vec![
        ("composition machine exactness", c1),
        ("layer invariant", c2),
        ("forward protocol compiler", c3(&runs)),
        ("two-party serialization", c4()),
        ("streaming equivalence triangle", c5()),
        ("single-layer CoT composition", c6()),
        ("offline CoT transcripts", c7()),
        ("no order 8 over F2^3", c8()),
        ("affine function counting", c9()),
        ("width/precision round trip", c10()),
        ("determinism of verify all", c11()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("PASS  criterion {:>2}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {:>2}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

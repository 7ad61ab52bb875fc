//! The invariant suites behind `ssmlab verify`.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use ssmlab::constructions::{
    build_composition_ssm, composition_trace_violation, mod_counter_machine, mod_counter_stream,
    streaming_composition_alg, streaming_composition_bits, universal_affine_machine, universal_stream,
};
use ssmlab::cot::{
    offline_protocol_compile, precision_to_width, run_cot, ssm_to_streaming, streaming_to_cot_ssm,
    width_precision_roundtrip, CoTMode,
};
use ssmlab::protocol::{
    compile_ssm_forward_protocol, min_one_round_cc, partition_stream, run_forward_protocol, serialize_two_party,
    validate_causality, validate_two_party, Party, ProtocolSetup,
};
use ssmlab::random::{derive_seed, random_cot_machine, random_machine, random_stream, seeded, MachineShape};
use ssmlab::ring::{ceil_log2, enumerate_affine_maps, StateSpace};
use ssmlab::task::{instances, random_map, InstanceMode, PCInstance};
use ssmlab::verify::algebra_suite;
use ssmlab::{AffineMap, Budget, CompositionInstance, Precision, SSMachine, Token};

use crate::config::{Suite, VerifyConfig};

/// Inputs shared by every check.
#[derive(Clone, Debug)]
pub struct SuiteContext {
    pub seed: u64,
    pub budget: Budget,
    pub thoughts: usize,
    pub verify: VerifyConfig,
}

impl SuiteContext {
    fn rng(&self, check: u64, job: u64) -> rand_chacha::ChaCha8Rng {
        seeded(derive_seed(derive_seed(self.seed, check), job))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: &'static str,
    pub seed: u64,
    pub budget: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "check", "passed"]).expect("in-memory write");
        for c in &self.checks {
            w.write_record([c.suite, c.name, if c.passed { "true" } else { "false" }])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Per-case outcome: `Ok(None)` passes, `Ok(Some(why))` fails.
type Case = ssmlab::Result<Option<String>>;

#[derive(Debug, Default)]
struct Tally {
    cases: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn add(&mut self, case: Case) {
        self.cases += 1;
        let why = match case {
            Ok(None) => return,
            Ok(Some(why)) => why,
            Err(e) => format!("error: {e}"),
        };
        self.failures += 1;
        self.first_failure.get_or_insert(why);
    }

    fn extend(&mut self, cases: impl IntoIterator<Item = Case>) {
        for c in cases {
            self.add(c);
        }
    }

    fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn detail(&self) -> Value {
        json!({
            "cases": self.cases,
            "failures": self.failures,
            "first_failure": self.first_failure,
        })
    }
}

fn fail_if(bad: bool, why: impl FnOnce() -> String) -> Option<String> {
    bad.then(why)
}

fn check(suite: &'static str, name: &'static str, f: impl FnOnce() -> ssmlab::Result<(bool, Value)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult {
            suite,
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            suite,
            name,
            passed: false,
            detail: json!({ "error": e.to_string() }),
        },
    }
}

fn tallied(t: Tally) -> ssmlab::Result<(bool, Value)> {
    Ok((t.passed(), t.detail()))
}

pub fn run_suite(suite: Suite, ctx: &SuiteContext) -> VerifyReport {
    let checks = match suite {
        Suite::All => [algebra(ctx), constructions(ctx), protocol(ctx), cot(ctx)].concat(),
        Suite::Algebra => algebra(ctx),
        Suite::Constructions => constructions(ctx),
        Suite::Protocol => protocol(ctx),
        Suite::Cot => cot(ctx),
    };
    VerifyReport {
        suite: suite.name(),
        seed: ctx.seed,
        budget: ctx.budget.0.min(u64::MAX as u128) as u64,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn label(inst: &CompositionInstance) -> String {
    format!("N={} K={} a={} tables={:?}", inst.domain(), inst.functions(), inst.start(), inst.tables())
}

fn small_grid(ctx: &SuiteContext) -> Vec<(usize, usize)> {
    let v = &ctx.verify;
    (1..=v.exhaustive_max_n)
        .flat_map(|n| (1..=v.exhaustive_max_k).map(move |k| (n, k)))
        .collect()
}

fn exhaustive(n: usize, k: usize, budget: Budget) -> ssmlab::Result<Vec<CompositionInstance>> {
    Ok(instances(n, k, InstanceMode::Exhaustive, budget)?.collect())
}

fn sampled(ctx: &SuiteContext, check_id: u64) -> ssmlab::Result<Vec<CompositionInstance>> {
    let v = &ctx.verify;
    let mode = InstanceMode::Random {
        seed: derive_seed(ctx.seed, check_id),
        count: v.random_instances,
    };
    Ok(instances(v.random_n, v.random_k, mode, ctx.budget)?.collect())
}

// Algebra.

fn algebra(ctx: &SuiteContext) -> Vec<CheckResult> {
    let report = match algebra_suite(ctx.budget) {
        Ok(r) => r,
        Err(e) => return vec![check("algebra", "algebra_suite", || Err(e))],
    };
    vec![
        check("algebra", "affine_orders_f2_cube", || {
            let o = &report.orders;
            Ok((o.passed() && o.total == 1344 && o.invertible_matrices == 168, value(o)))
        }),
        check("algebra", "gl_order_spectra", || {
            let ok = report.gl1_spectrum == BTreeSet::from([1])
                && report.gl2_spectrum == BTreeSet::from([1, 2, 3])
                && report.gl3_spectrum == BTreeSet::from([1, 2, 3, 4, 7]);
            Ok((
                ok,
                json!({
                    "gl1_f2": report.gl1_spectrum,
                    "gl2_f2": report.gl2_spectrum,
                    "gl3_f2": report.gl3_spectrum,
                }),
            ))
        }),
        check("algebra", "unipotent_geometric_sum", || {
            Ok((report.unipotent.passed(), value(&report.unipotent)))
        }),
        check("algebra", "affine_function_counting", || {
            Ok((report.counting.iter().all(|c| c.passed()), value(&report.counting)))
        }),
        check("algebra", "width_one_pigeonhole", || {
            Ok((report.pigeonhole.iter().all(|c| c.passed()), value(&report.pigeonhole)))
        }),
        check("algebra", "mod_counter_order", || {
            Ok((report.counter_order == 8, json!({ "order": report.counter_order })))
        }),
    ]
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

// Constructions.

fn composition_case(machine: &SSMachine, inst: &CompositionInstance, recurrence: bool) -> Case {
    let trace = machine.run(&inst.encode_row_major().to_data_tokens())?;
    let expected = Token::scalar(inst.eval() as u64);
    if trace.final_output() != &expected {
        return Ok(Some(format!("{}: output {:?}", label(inst), trace.final_output().payload)));
    }
    if let Some(why) = composition_trace_violation(inst, &trace) {
        return Ok(Some(format!("{}: {why}", label(inst))));
    }
    if recurrence {
        if let Some((layer, t)) = trace.find_recurrence_violation(machine)? {
            return Ok(Some(format!("{}: recurrence broken at layer {layer}, t={t}", label(inst))));
        }
    }
    Ok(None)
}

fn constructions(ctx: &SuiteContext) -> Vec<CheckResult> {
    vec![
        check("constructions", "composition_exhaustive", || {
            let mut t = Tally::default();
            for (n, k) in small_grid(ctx) {
                let machine = build_composition_ssm(n, k)?;
                let insts = exhaustive(n, k, ctx.budget)?;
                t.extend(
                    insts
                        .par_iter()
                        .map(|inst| composition_case(&machine, inst, false))
                        .collect::<Vec<_>>(),
                );
            }
            tallied(t)
        }),
        check("constructions", "composition_random", || {
            let v = &ctx.verify;
            let machine = build_composition_ssm(v.random_n, v.random_k)?;
            let mut t = Tally::default();
            t.extend(
                sampled(ctx, 1)?
                    .par_iter()
                    .map(|inst| composition_case(&machine, inst, true))
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("constructions", "streaming_composition", || {
            let mut t = Tally::default();
            for (n, k) in small_grid(ctx) {
                let alg = streaming_composition_alg(n, k)?;
                t.add(Ok(fail_if(alg.state_bits() != streaming_composition_bits(n), || {
                    format!("N={n}: state size {}", alg.state_bits())
                })));
                let insts = exhaustive(n, k, ctx.budget)?;
                t.extend(
                    insts
                        .par_iter()
                        .map(|inst| {
                            let out = alg.run(&inst.encode_row_major().to_data_tokens())?;
                            Ok(fail_if(out != Token::scalar(inst.eval() as u64), || label(inst)))
                        })
                        .collect::<Vec<_>>(),
                );
            }
            tallied(t)
        }),
        check("constructions", "universal_affine_machine", || {
            let mut t = Tally::default();
            for (w, bits) in [(1usize, 1u32), (1, 2), (2, 1)] {
                let p = Precision::new(bits)?;
                let machine = universal_affine_machine(w, bits)?;
                let states: Vec<_> = StateSpace::new(w, p, ctx.budget)?.collect();
                for map in enumerate_affine_maps(w, p, ctx.budget)? {
                    for x in &states {
                        let out = machine.run_output(&universal_stream(x, &map)?)?;
                        let expected = map.apply(x)?;
                        let padded_ok = out.payload.len() >= w && out.payload[w..].iter().all(|&v| v == 0);
                        t.add(Ok(fail_if(!padded_ok || &out.payload[..w] != expected.values(), || {
                            format!("w={w} p={bits}: T={map} x={x}")
                        })));
                    }
                }
            }
            tallied(t)
        }),
        check("constructions", "mod_counter", || {
            let machine = mod_counter_machine();
            let mut t = Tally::default();
            for s in 0..8u64 {
                for incs in 0..=16usize {
                    let out = machine.run_output(&mod_counter_stream(s, incs))?;
                    t.add(Ok(fail_if(out != Token::scalar((s + incs as u64) % 8), || {
                        format!("start {s}, {incs} increments")
                    })));
                }
            }
            tallied(t)
        }),
    ]
}

// Protocol.

fn forward_composition_case(machine: &SSMachine, inst: &CompositionInstance) -> Case {
    let stream = inst.encode_row_major().to_data_tokens();
    let trace = machine.run(&stream)?;
    let tr = compile_ssm_forward_protocol(machine, inst)?;
    let c = AffineMap::serialized_bits(machine.dim(), machine.precision());
    let k = inst.functions();
    if &tr.output != trace.final_output() || tr.output != Token::scalar(inst.eval() as u64) {
        return Ok(Some(format!("{}: protocol output {:?}", label(inst), tr.output.payload)));
    }
    if !tr.all_messages().all(|m| m.bit_count() == c) {
        return Ok(Some(format!("{}: message size differs from {c}", label(inst))));
    }
    if tr.message_count() != (k - 1) * machine.layer_count() {
        return Ok(Some(format!("{}: {} messages", label(inst), tr.message_count())));
    }
    for (l, round) in tr.incoming.iter().enumerate() {
        for (i, h) in round.iter().enumerate() {
            if h != trace.state(l + 1, tr.setup.intervals[i].start - 1) {
                return Ok(Some(format!("{}: player {} misreads layer {}", label(inst), i + 1, l + 1)));
            }
        }
    }
    let report = validate_causality(machine, &tr)?;
    Ok(fail_if(!report.is_valid(), || {
        format!("{}: causality {:?}", label(inst), report.violations.first())
    }))
}

fn random_shape<R: Rng>(rng: &mut R, max_layers: usize) -> MachineShape {
    MachineShape {
        layers: rng.gen_range(1..=max_layers),
        dim: rng.gen_range(1..=2),
        bits: rng.gen_range(1..=3),
        width: 1,
        state_only_top: false,
    }
}

fn protocol(ctx: &SuiteContext) -> Vec<CheckResult> {
    let v = &ctx.verify;
    vec![
        check("protocol", "forward_composition_exhaustive", || {
            let mut t = Tally::default();
            for (n, k) in small_grid(ctx) {
                let machine = build_composition_ssm(n, k)?;
                let insts = exhaustive(n, k, ctx.budget)?;
                t.extend(
                    insts
                        .par_iter()
                        .map(|inst| forward_composition_case(&machine, inst))
                        .collect::<Vec<_>>(),
                );
            }
            tallied(t)
        }),
        check("protocol", "forward_composition_random", || {
            let machine = build_composition_ssm(v.random_n, v.random_k)?;
            let mut t = Tally::default();
            t.extend(
                sampled(ctx, 2)?
                    .par_iter()
                    .map(|inst| forward_composition_case(&machine, inst))
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("protocol", "forward_random_machines", || {
            let mut t = Tally::default();
            t.extend(
                (0..v.random_machines as u64)
                    .into_par_iter()
                    .map(|job| {
                        let mut rng = ctx.rng(3, job);
                        let shape = random_shape(&mut rng, 3);
                        let machine = random_machine(&mut rng, shape)?;
                        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
                        let inst = ssmlab::task::random_instance(&mut rng, n, k);
                        let tr = compile_ssm_forward_protocol(&machine, &inst)?;
                        let expected = machine.run_output(&inst.encode_row_major().to_data_tokens())?;
                        let c = (shape.dim * shape.dim + shape.dim) * shape.bits as usize;
                        let why = if tr.output != expected {
                            Some("protocol output differs from the machine")
                        } else if !tr.all_messages().all(|m| m.bit_count() == c) {
                            Some("message size differs from (d²+d)p")
                        } else if !validate_causality(&machine, &tr)?.is_valid() {
                            Some("causality violated")
                        } else {
                            None
                        };
                        Ok(why.map(|w| format!("machine {job} {shape:?}: {w}")))
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("protocol", "two_party_schedule", || {
            let mut t = Tally::default();
            let jobs: Vec<(usize, u64)> = (1..=v.schedule_max_layers)
                .flat_map(|l| (0..v.schedule_trials as u64).map(move |j| (l, j)))
                .collect();
            t.extend(
                jobs.par_iter()
                    .map(|&(l, job)| {
                        let mut rng = ctx.rng(4, (l as u64) << 32 | job);
                        let k = l + 3;
                        let n = rng.gen_range(2..=8);
                        let pc = PCInstance::new(n, random_map(&mut rng, n), random_map(&mut rng, n), k)?;
                        let inst = pc.to_composition()?;
                        let shape = MachineShape {
                            layers: l,
                            dim: 1,
                            bits: 3,
                            width: 1,
                            state_only_top: false,
                        };
                        let machine = random_machine(&mut rng, shape)?;
                        let stream = inst.encode_row_major();
                        let setup = ProtocolSetup::new(&stream.to_data_tokens(), partition_stream(&stream)?)?;
                        let tr = run_forward_protocol(&machine, setup)?;
                        let tp = serialize_two_party(&tr)?;
                        let last = if l % 2 == 0 { Party::Alice } else { Party::Bob };
                        let schedule_ok = tp.messages.iter().enumerate().all(|(j, m)| {
                            let j = j + 1;
                            let allowed = if j == 1 { [1, 1] } else { [j - 1, j] };
                            m.components
                                .iter()
                                .all(|c| allowed.contains(&c.round) && c.round <= l && Party::of_player(c.sender) == m.speaker)
                        });
                        let alternating = tp.messages.windows(2).all(|w| w[0].speaker != w[1].speaker);
                        let why = if tp.message_count() > l + 1 {
                            Some("too many messages")
                        } else if tp.last_speaker() != Some(last) {
                            Some("wrong last speaker")
                        } else if !schedule_ok || !alternating {
                            Some("schedule mismatch")
                        } else if !validate_two_party(&machine, &tp)?.is_valid() {
                            Some("two-party causality violated")
                        } else {
                            None
                        };
                        Ok(why.map(|w| format!("L={l} trial {job}: {w}")))
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("protocol", "pointer_chasing_parity", || {
            let mut t = Tally::default();
            t.extend(
                (0..v.pc_instances as u64)
                    .into_par_iter()
                    .map(|job| {
                        let mut rng = ctx.rng(5, job);
                        let n = rng.gen_range(1..=v.pc_max_n);
                        let k = rng.gen_range(1..=6);
                        let pc = PCInstance::new(n, random_map(&mut rng, n), random_map(&mut rng, n), k)?;
                        let inst = pc.to_composition()?;
                        let machine = build_composition_ssm(n, k)?;
                        let tr = compile_ssm_forward_protocol(&machine, &inst)?;
                        let tp = serialize_two_party(&tr)?;
                        let parity = pc.eval().1;
                        let why = if tp.output_bit != parity || tp.messages.last().and_then(|m| m.output_bit) != Some(parity) {
                            Some("appended bit differs from the parity")
                        } else if !validate_two_party(&machine, &tp)?.is_valid() {
                            Some("two-party causality violated")
                        } else {
                            None
                        };
                        Ok(why.map(|w| format!("N={n} k={k}: {w}")))
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("protocol", "one_round_cc_monotone", || {
            let mut table = Vec::new();
            let mut ok = true;
            for n in 1..=3usize {
                let mut prev = 0;
                for k in 1..=4usize {
                    let bits = min_one_round_cc(n, k, ctx.budget)?;
                    let whole_table = (n as u32) * ceil_log2(n as u128);
                    ok &= bits >= prev && bits <= whole_table && (n > 1 || bits == 0);
                    prev = bits;
                    table.push(json!({ "N": n, "k": k, "bits": bits }));
                }
            }
            Ok((ok, Value::Array(table)))
        }),
    ]
}

// Chain of thought.

fn cot(ctx: &SuiteContext) -> Vec<CheckResult> {
    let v = &ctx.verify;
    let thoughts = ctx.thoughts;
    vec![
        check("cot", "triangle_equivalence", || {
            let mut t = Tally::default();
            t.extend(
                (0..v.cot_machines as u64)
                    .into_par_iter()
                    .flat_map_iter(|job| {
                        let mut rng = ctx.rng(6, job);
                        let max_len = 12;
                        let shape = MachineShape {
                            layers: rng.gen_range(1..=2),
                            dim: rng.gen_range(1..=2),
                            bits: rng.gen_range(1..=3),
                            width: rng.gen_range(1..=2),
                            state_only_top: rng.gen_bool(0.5),
                        };
                        let cases: ssmlab::Result<Vec<Case>> = (|| {
                            let machine = random_cot_machine(&mut rng, shape, CoTMode::Online, thoughts)?;
                            let (alg, account) = ssm_to_streaming(&machine, max_len * (1 + thoughts))?;
                            let compiled = streaming_to_cot_ssm(&alg, 2, account.total.div_ceil(2) as u32)?;
                            let mut cases = vec![Ok(fail_if(alg.state_bits() != account.total, || {
                                format!("machine {job}: memory {} != account {}", alg.state_bits(), account.total)
                            }))];
                            for _ in 0..v.cot_streams {
                                let len = rng.gen_range(1..=max_len);
                                let stream = random_stream(&mut rng, machine.base.alphabet(), len);
                                cases.push((|| {
                                    let direct = run_cot(&machine, &stream)?.output;
                                    let streamed = alg.run(&stream)?;
                                    let (out, rec) = compiled.run(&stream)?;
                                    Ok(if streamed != direct {
                                        Some(format!("machine {job}: streaming output differs"))
                                    } else if out != direct {
                                        Some(format!("machine {job}: recompiled output differs"))
                                    } else if rec.steps() != 2 * len || !rec.thoughts.iter().all(|&k| k == 1) {
                                        Some(format!("machine {job}: recompiled machine used {} steps", rec.steps()))
                                    } else {
                                        None
                                    })
                                })());
                            }
                            Ok(cases)
                        })();
                        cases.unwrap_or_else(|e| vec![Err(e)])
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("cot", "single_layer_composition", || {
            let mut t = Tally::default();
            for (n, k) in small_grid(ctx) {
                let alg = streaming_composition_alg(n, k)?;
                let state_bits = 2 * ceil_log2(n as u128 + 1);
                t.add(Ok(fail_if(alg.state_bits() != state_bits as usize, || {
                    format!("N={n}: {} state bits", alg.state_bits())
                })));
                let compiled = streaming_to_cot_ssm(&alg, 1, state_bits)?;
                let insts = exhaustive(n, k, ctx.budget)?;
                t.extend(
                    insts
                        .par_iter()
                        .map(|inst| {
                            let stream = inst.encode_row_major().to_data_tokens();
                            let (out, rec) = compiled.run(&stream)?;
                            Ok(fail_if(
                                out != Token::scalar(inst.eval() as u64) || rec.total_thoughts() != stream.len(),
                                || label(inst),
                            ))
                        })
                        .collect::<Vec<_>>(),
                );
            }
            tallied(t)
        }),
        check("cot", "offline_transcripts", || {
            let mut t = Tally::default();
            t.extend(
                (0..v.offline_machines as u64)
                    .into_par_iter()
                    .map(|job| {
                        let mut rng = ctx.rng(7, job);
                        let shape = random_shape(&mut rng, 3);
                        let machine = random_cot_machine(&mut rng, shape, CoTMode::Offline, thoughts)?;
                        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
                        let inst = ssmlab::task::random_instance(&mut rng, n, k);
                        let run = offline_protocol_compile(&machine, &inst)?;
                        let null = compile_ssm_forward_protocol(&machine.base, &inst)?;
                        let rec = run_cot(&machine, &inst.encode_row_major().to_data_tokens())?;
                        let why = if run.transcript != null {
                            Some("transcript differs from the null-policy transcript")
                        } else if run.output != rec.output {
                            Some("output differs from the direct run")
                        } else {
                            None
                        };
                        Ok(why.map(|w| format!("machine {job}: {w}")))
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
        check("cot", "width_precision_roundtrip", || {
            let mut t = Tally::default();
            t.extend(
                (0..v.roundtrip_machines as u64)
                    .into_par_iter()
                    .flat_map_iter(|job| {
                        let mut rng = ctx.rng(8, job);
                        let shape = MachineShape {
                            layers: rng.gen_range(1..=2),
                            dim: rng.gen_range(1..=2),
                            bits: rng.gen_range(1..=3),
                            width: 1,
                            state_only_top: true,
                        };
                        let max_len = 8;
                        let horizon = max_len * (1 + thoughts);
                        let cases: ssmlab::Result<Vec<Case>> = (|| {
                            let machine = random_cot_machine(&mut rng, shape, CoTMode::Online, thoughts)?;
                            let rt = width_precision_roundtrip(&machine, horizon)?;
                            let back = precision_to_width(&machine, shape.dim + 1, horizon)?;
                            let p_prime = rt.compiled.machine.base.precision().bits() as usize;
                            let expected = shape.layers * shape.dim * shape.bits as usize
                                + ceil_log2(horizon as u128 + 1) as usize;
                            let mut cases = vec![Ok(fail_if(p_prime != expected, || {
                                format!("machine {job}: p' = {p_prime}, expected {expected}")
                            }))];
                            for _ in 0..v.roundtrip_streams {
                                let len = rng.gen_range(1..=max_len);
                                let stream = random_stream(&mut rng, machine.base.alphabet(), len);
                                cases.push((|| {
                                    let direct = run_cot(&machine, &stream)?.output;
                                    Ok(fail_if(rt.run(&stream)? != direct || back.run(&stream)? != direct, || {
                                        format!("machine {job}: re-encoded output differs")
                                    }))
                                })());
                            }
                            Ok(cases)
                        })();
                        cases.unwrap_or_else(|e| vec![Err(e)])
                    })
                    .collect::<Vec<_>>(),
            );
            tallied(t)
        }),
    ]
}

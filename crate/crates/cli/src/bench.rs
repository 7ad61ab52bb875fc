//! Table-producing commands: protocol cost, width/precision round trips and
//! the one-round pointer-chasing oracle.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use ssmlab::constructions::build_composition_ssm;
use ssmlab::cot::{run_cot, width_precision_roundtrip, CoTMode};
use ssmlab::protocol::{compile_ssm_forward_protocol, min_one_round_cc, ProtocolSummary};
use ssmlab::random::{derive_seed, random_cot_machine, random_machine, random_stream, seeded, MachineShape};
use ssmlab::ring::ceil_log2;
use ssmlab::task::{instances, InstanceMode};
use ssmlab::{AffineMap, Budget, SSMachine};

use crate::config::{BenchConfig, BenchCell, MachineChoice, PcCell, RoundtripCell};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct BenchRow {
    pub N: usize,
    pub K: usize,
    pub L: usize,
    pub d: usize,
    pub p: u32,
    pub machine: &'static str,
    pub instances: usize,
    pub max_message_bits: usize,
    pub total_bits: usize,
    /// `(d²+d)·p`.
    pub block_summary_bits: usize,
    pub matched: usize,
    #[serde(rename = "match")]
    pub matches: bool,
}

fn cell_machine(cell: &BenchCell, seed: u64) -> Result<(SSMachine, &'static str), CliError> {
    Ok(match &cell.machine {
        MachineChoice::Composition => (build_composition_ssm(cell.n, cell.k)?, "composition"),
        MachineChoice::Random { layers, dim, precision } => {
            let shape = MachineShape {
                layers: *layers,
                dim: *dim,
                bits: *precision,
                width: 1,
                state_only_top: false,
            };
            (random_machine(&mut seeded(seed), shape)?, "random")
        }
        MachineChoice::Spec { spec } => (spec.build()?, "spec"),
    })
}

fn bench_cell(cell: &BenchCell, per_cell: usize, seed: u64, budget: Budget) -> Result<BenchRow, CliError> {
    let (machine, kind) = cell_machine(cell, derive_seed(seed, 0))?;
    let space = (cell.n as u128).checked_pow((cell.n * cell.k + 1) as u32);
    let mode = match space {
        Some(count) if count <= per_cell as u128 => InstanceMode::Exhaustive,
        _ => InstanceMode::Random {
            seed: derive_seed(seed, 1),
            count: per_cell,
        },
    };
    let (d, p) = (machine.dim(), machine.precision());
    let mut row = BenchRow {
        N: cell.n,
        K: cell.k,
        L: machine.layer_count(),
        d,
        p: p.bits(),
        machine: kind,
        instances: 0,
        max_message_bits: 0,
        total_bits: 0,
        block_summary_bits: AffineMap::serialized_bits(d, p),
        matched: 0,
        matches: true,
    };
    for inst in instances(cell.n, cell.k, mode, budget)? {
        let transcript = compile_ssm_forward_protocol(&machine, &inst)?;
        let summary = ProtocolSummary::new(&inst, &transcript);
        let ok = match cell.machine {
            MachineChoice::Composition => summary.matches,
            _ => transcript.output == machine.run_output(&inst.encode_row_major().to_data_tokens())?,
        };
        row.instances += 1;
        row.max_message_bits = row.max_message_bits.max(summary.max_message_bits);
        row.total_bits = row.total_bits.max(summary.total_bits);
        row.matched += ok as usize;
        row.matches &= ok;
    }
    Ok(row)
}

pub fn bench_protocol(config: &BenchConfig, seed: u64, budget: Budget) -> Result<Vec<BenchRow>, CliError> {
    if config.grid.is_empty() {
        return Err(CliError::Usage("bench_protocol.grid is empty".into()));
    }
    config
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, cell)| bench_cell(cell, config.instances, derive_seed(seed, i as u64), budget))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct RoundtripRow {
    pub L: usize,
    pub w: usize,
    pub p: u32,
    pub token_width: usize,
    pub machine: usize,
    pub horizon: usize,
    pub streams: usize,
    pub equal: usize,
    pub equality_rate: f64,
    pub state_bits: usize,
    pub counter_bits: usize,
    pub output_bits: usize,
    /// Precision of the width-1 re-encoding.
    pub p_prime: usize,
    /// `L·w·p + counter_bits`.
    pub p_prime_formula: usize,
}

fn roundtrip_machine(cell: &RoundtripCell, index: usize, thoughts: usize, seed: u64) -> Result<RoundtripRow, CliError> {
    let mut rng = seeded(seed);
    let shape = MachineShape {
        layers: cell.layers,
        dim: cell.width,
        bits: cell.precision,
        width: cell.token_width,
        state_only_top: true,
    };
    let machine = random_cot_machine(&mut rng, shape, CoTMode::Online, thoughts)?;
    let horizon = cell.stream_len * (1 + thoughts);
    let rt = width_precision_roundtrip(&machine, horizon)?;
    let mut equal = 0;
    for _ in 0..cell.streams {
        let len = rng.gen_range(1..=cell.stream_len);
        let stream = random_stream(&mut rng, machine.base.alphabet(), len);
        equal += (rt.run(&stream)? == run_cot(&machine, &stream)?.output) as usize;
    }
    let counter_bits = ceil_log2(horizon as u128 + 1) as usize;
    Ok(RoundtripRow {
        L: cell.layers,
        w: cell.width,
        p: cell.precision,
        token_width: cell.token_width,
        machine: index,
        horizon,
        streams: cell.streams,
        equal,
        equality_rate: if cell.streams == 0 {
            1.0
        } else {
            equal as f64 / cell.streams as f64
        },
        state_bits: rt.account.state_bits,
        counter_bits: rt.account.counter_bits,
        output_bits: rt.account.output_bits,
        p_prime: rt.compiled.machine.base.precision().bits() as usize,
        p_prime_formula: cell.layers * cell.width * cell.precision as usize + counter_bits,
    })
}

pub fn cot_roundtrip(grid: &[RoundtripCell], thoughts: usize, seed: u64) -> Result<Vec<RoundtripRow>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Usage("cot_roundtrip.grid is empty".into()));
    }
    let jobs: Vec<(usize, usize, &RoundtripCell)> = grid
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.machines).map(move |m| (c, m, cell)))
        .collect();
    jobs.par_iter()
        .map(|&(c, m, cell)| roundtrip_machine(cell, m, thoughts, derive_seed(derive_seed(seed, c as u64), m as u64)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[allow(non_snake_case)]
pub struct PcRow {
    pub N: usize,
    pub k: usize,
    pub bits: u32,
}

pub fn pc_oracle(grid: &[PcCell], budget: Budget) -> Result<Vec<PcRow>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Usage("pc_oracle.grid is empty".into()));
    }
    grid.par_iter()
        .map(|c| {
            Ok(PcRow {
                N: c.n,
                k: c.k,
                bits: min_one_round_cc(c.n, c.k, budget)?,
            })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

//! Batch harness around `ssmlab`: verification suites, protocol cost
//! tables, chain-of-thought round trips and single-instance runs.
//!
//! Every command is a pure function of the configuration, the seed and the
//! enumeration budget. Reports go to `--out DIR` when given, else stdout.

pub mod bench;
pub mod config;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use ssmlab::constructions::build_composition_ssm;
use ssmlab::verify::algebra_suite;
use ssmlab::{CompositionInstance, Token};

use crate::config::{ExperimentConfig, Format, PcCell, Suite};
use crate::suites::{run_suite, SuiteContext};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lib(#[from] ssmlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ssmlab::Error as E;
        match self {
            CliError::Lib(
                E::Parse(_)
                | E::InvalidInstance(_)
                | E::InvalidMachine(_)
                | E::InvalidPrecision(_)
                | E::BudgetExceeded { .. },
            )
            | CliError::Usage(_)
            | CliError::Config(_)
            | CliError::Io(_) => 2,
            CliError::Lib(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssmlab", version, about = "Exact experiments on finite-precision state-space models")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run invariant suites; exit 1 if any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Option<Suite>,
    },
    /// Protocol cost per grid cell of (N, K, machine).
    BenchProtocol,
    /// Width-to-precision re-encoding over a grid of random machines.
    CotRoundtrip,
    /// Build the composition machine for an instance file and run it.
    Compose { instance: PathBuf },
    /// Minimum one-round cost of pointer chasing by exhaustive search.
    PcOracle {
        #[arg(long, requires = "k")]
        n: Option<usize>,
        #[arg(long, requires = "n")]
        k: Option<usize>,
    },
    /// The finite-group order and counting checks as one report.
    Algebra,
}

/// A finished command: report text and whether its checks passed.
#[derive(Debug)]
pub struct Outcome {
    pub name: String,
    pub dir: Option<PathBuf>,
    pub format: Format,
    pub body: String,
    pub passed: bool,
}

struct Env {
    config: ExperimentConfig,
    seed: u64,
    budget: ssmlab::Budget,
    format: Format,
    dir: Option<PathBuf>,
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn resolve(cli: &Cli, env_budget: Option<&str>) -> Result<Env, CliError> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(Env {
        seed: cli.seed.unwrap_or(config.seed),
        budget: config.budget(env_budget)?,
        format: cli.format.unwrap_or(config.output.format),
        dir: cli.out.clone().or_else(|| config.output.dir.clone()),
        config,
    })
}

/// Executes a parsed command without touching the filesystem for output.
pub fn execute(cli: &Cli, env_budget: Option<&str>) -> Result<Outcome, CliError> {
    let env = resolve(cli, env_budget)?;
    let format = env.format;
    let outcome = |name: String, body: String, passed: bool| Outcome {
        name,
        dir: env.dir.clone(),
        format,
        body,
        passed,
    };
    match &cli.command {
        Command::Verify { suite } => {
            let suite = suite.unwrap_or(env.config.suite);
            let ctx = SuiteContext {
                seed: env.seed,
                budget: env.budget,
                thoughts: env.config.budget.thoughts,
                verify: env.config.verify.clone(),
            };
            let report = run_suite(suite, &ctx);
            let body = match format {
                Format::Json => json_text(&report),
                Format::Csv => report.to_csv(),
            };
            Ok(outcome(format!("verify-{}", suite.name()), body, report.passed))
        }
        Command::BenchProtocol => {
            let rows = bench::bench_protocol(&env.config.bench_protocol, env.seed, env.budget)?;
            let passed = rows.iter().all(|r| r.matches);
            let body = match format {
                Format::Json => json_text(&rows),
                Format::Csv => bench::to_csv(&rows)?,
            };
            Ok(outcome("bench-protocol".into(), body, passed))
        }
        Command::CotRoundtrip => {
            let rows = bench::cot_roundtrip(&env.config.cot_roundtrip.grid, env.config.budget.thoughts, env.seed)?;
            let passed = rows
                .iter()
                .all(|r| r.equal == r.streams && r.p_prime == r.p_prime_formula);
            let body = match format {
                Format::Json => json_text(&rows),
                Format::Csv => bench::to_csv(&rows)?,
            };
            Ok(outcome("cot-roundtrip".into(), body, passed))
        }
        Command::Compose { instance } => {
            let text = std::fs::read_to_string(instance)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", instance.display())))?;
            let inst = CompositionInstance::from_text(&text)?;
            let machine = build_composition_ssm(inst.domain(), inst.functions())?;
            let trace = machine.run(&inst.encode_row_major().to_data_tokens())?;
            let output = trace.final_output().payload.first().copied().unwrap_or(0);
            let oracle = inst.eval() as u64;
            let passed = trace.final_output() == &Token::scalar(oracle);
            let body = match format {
                Format::Json => json_text(&json!({
                    "N": inst.domain(),
                    "K": inst.functions(),
                    "a": inst.start(),
                    "layers": machine.layer_count(),
                    "dim": machine.dim(),
                    "precision": machine.precision().bits(),
                    "output": output,
                    "oracle_output": oracle,
                    "match": passed,
                })),
                Format::Csv => trace.to_csv(),
            };
            Ok(outcome("compose".into(), body, passed))
        }
        Command::PcOracle { n, k } => {
            let grid = match (n, k) {
                (Some(n), Some(k)) => vec![PcCell { n: *n, k: *k }],
                _ => env.config.pc_oracle.grid.clone(),
            };
            let rows = bench::pc_oracle(&grid, env.budget)?;
            let body = match format {
                Format::Json => json_text(&rows),
                Format::Csv => bench::to_csv(&rows)?,
            };
            Ok(outcome("pc-oracle".into(), body, true))
        }
        Command::Algebra => {
            let report = algebra_suite(env.budget)?;
            let passed = report.passed();
            let body = match format {
                Format::Json => json_text(&report),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["order", "count"]).expect("in-memory write");
                    for (order, count) in &report.orders.histogram {
                        w.write_record([order.to_string(), count.to_string()])
                            .expect("in-memory write");
                    }
                    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
                }
            };
            Ok(outcome("algebra".into(), body, passed))
        }
    }
}

/// Writes the report into its directory, or to `stdout` when there is none,
/// and returns the file path.
pub fn emit(outcome: &Outcome, stdout: &mut dyn Write) -> Result<Option<PathBuf>, CliError> {
    match &outcome.dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.{}", outcome.name, outcome.format.extension()));
            std::fs::write(&path, &outcome.body)?;
            Ok(Some(path))
        }
        None => {
            stdout.write_all(outcome.body.as_bytes())?;
            Ok(None)
        }
    }
}

/// Full entry point: parse, execute, emit. Returns the process exit code.
pub fn run<I, T>(args: I, env_budget: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let result = execute(&cli, env_budget).and_then(|o| emit(&o, stdout).map(|path| (o, path)));
    match result {
        Ok((outcome, path)) => {
            if let Some(path) = path {
                let _ = writeln!(stderr, "wrote {}", path.display());
            }
            if outcome.passed {
                0
            } else {
                let _ = writeln!(stderr, "{}: verification failed", outcome.name);
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

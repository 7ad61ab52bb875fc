//! Declarative experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssmlab::rules::MachineSpec;
use ssmlab::Budget;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Algebra,
    Protocol,
    Cot,
    Constructions,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Algebra => "algebra",
            Suite::Protocol => "protocol",
            Suite::Cot => "cot",
            Suite::Constructions => "constructions",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub suite: Suite,
    pub budget: BudgetConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub bench_protocol: BenchConfig,
    pub cot_roundtrip: RoundtripConfig,
    pub pc_oracle: PcOracleConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Cap on the size of any exhaustive enumeration.
    pub enumeration: u64,
    /// Thought budget of randomly generated chain-of-thought machines.
    pub thoughts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub exhaustive_max_n: usize,
    pub exhaustive_max_k: usize,
    pub random_n: usize,
    pub random_k: usize,
    pub random_instances: usize,
    pub random_machines: usize,
    pub schedule_max_layers: usize,
    pub schedule_trials: usize,
    pub pc_instances: usize,
    pub pc_max_n: usize,
    pub cot_machines: usize,
    pub cot_streams: usize,
    pub offline_machines: usize,
    pub roundtrip_machines: usize,
    pub roundtrip_streams: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Instances per cell. A cell whose whole instance space is no larger
    /// is enumerated; otherwise this many seeded random instances are drawn.
    pub instances: usize,
    pub grid: Vec<BenchCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub n: usize,
    pub k: usize,
    #[serde(flatten)]
    pub machine: MachineChoice,
}

/// Machine a protocol benchmark cell runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "machine", rename_all = "snake_case")]
pub enum MachineChoice {
    /// The `(K+1)`-layer composition machine for the cell's `N` and `K`.
    Composition,
    /// A seeded random table machine over width-1 tokens.
    Random { layers: usize, dim: usize, precision: u32 },
    /// An explicit machine description.
    Spec { spec: MachineSpec },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundtripConfig {
    pub grid: Vec<RoundtripCell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripCell {
    pub layers: usize,
    pub width: usize,
    pub precision: u32,
    #[serde(default = "default_token_width")]
    pub token_width: usize,
    pub machines: usize,
    pub streams: usize,
    pub stream_len: usize,
}

fn default_token_width() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcOracleConfig {
    pub grid: Vec<PcCell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcCell {
    pub n: usize,
    pub k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            suite: Suite::All,
            budget: BudgetConfig::default(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
            bench_protocol: BenchConfig::default(),
            cot_roundtrip: RoundtripConfig::default(),
            pc_oracle: PcOracleConfig::default(),
        }
    }
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            enumeration: Budget::DEFAULT.0 as u64,
            thoughts: 3,
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            exhaustive_max_n: 3,
            exhaustive_max_k: 3,
            random_n: 64,
            random_k: 6,
            random_instances: 500,
            random_machines: 200,
            schedule_max_layers: 5,
            schedule_trials: 10,
            pc_instances: 100,
            pc_max_n: 8,
            cot_machines: 20,
            cot_streams: 100,
            offline_machines: 100,
            roundtrip_machines: 20,
            roundtrip_streams: 50,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        let composition = |n, k| BenchCell {
            n,
            k,
            machine: MachineChoice::Composition,
        };
        let random = |n, k, layers, dim, precision| BenchCell {
            n,
            k,
            machine: MachineChoice::Random { layers, dim, precision },
        };
        Self {
            instances: 20,
            grid: vec![
                composition(2, 3),
                composition(3, 2),
                composition(3, 4),
                composition(8, 4),
                composition(64, 6),
                composition(255, 3),
                random(3, 4, 1, 1, 4),
                random(3, 4, 2, 2, 4),
                random(8, 4, 3, 2, 4),
                random(8, 4, 3, 3, 2),
            ],
        }
    }
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        let cell = |layers, width, precision| RoundtripCell {
            layers,
            width,
            precision,
            token_width: 1,
            machines: 5,
            streams: 50,
            stream_len: 8,
        };
        Self {
            grid: vec![cell(1, 1, 2), cell(1, 2, 2), cell(2, 1, 3), cell(2, 2, 2)],
        }
    }
}

impl Default for PcOracleConfig {
    fn default() -> Self {
        Self {
            grid: (1..=3)
                .flat_map(|n| (1..=4).map(move |k| PcCell { n, k }))
                .collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: &str| Err(CliError::Config(m.to_string()));
        if self.budget.enumeration == 0 {
            return fail("budget.enumeration must be positive");
        }
        if self.budget.thoughts == 0 {
            return fail("budget.thoughts must be positive");
        }
        let v = &self.verify;
        if v.exhaustive_max_n == 0 || v.exhaustive_max_k == 0 || v.random_n == 0 || v.random_k == 0 {
            return fail("verify domain sizes must be positive");
        }
        if v.pc_max_n == 0 || v.schedule_max_layers == 0 {
            return fail("verify.pc_max_n and verify.schedule_max_layers must be positive");
        }
        if self.bench_protocol.instances == 0 {
            return fail("bench_protocol.instances must be positive");
        }
        for cell in &self.bench_protocol.grid {
            if cell.n == 0 || cell.k == 0 {
                return fail("bench_protocol cells need n, k >= 1");
            }
            if let MachineChoice::Random { layers, dim, precision } = cell.machine {
                if layers == 0 || dim == 0 || precision == 0 || precision > 8 {
                    return fail("random bench machines need layers, dim >= 1 and 1 <= precision <= 8");
                }
            }
        }
        for cell in &self.cot_roundtrip.grid {
            if cell.layers == 0 || cell.width == 0 || cell.precision == 0 || cell.token_width == 0 {
                return fail("cot_roundtrip cells need positive shape parameters");
            }
            if cell.precision as usize * cell.token_width > 12 {
                return fail("cot_roundtrip cells need precision * token_width <= 12");
            }
        }
        for cell in &self.pc_oracle.grid {
            if cell.n == 0 || cell.k == 0 {
                return fail("pc_oracle cells need n, k >= 1");
            }
        }
        Ok(())
    }

    /// The enumeration budget, capped by `SSMLAB_BUDGET` when set.
    pub fn budget(&self, env: Option<&str>) -> Result<Budget, CliError> {
        let mut cap = self.budget.enumeration as u128;
        if let Some(raw) = env {
            let parsed: u128 = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("SSMLAB_BUDGET must be a positive integer, got {raw:?}")))?;
            if parsed == 0 {
                return Err(CliError::Config("SSMLAB_BUDGET must be positive".into()));
            }
            cap = cap.min(parsed);
        }
        Ok(Budget(cap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 9\n[verify]\ncot_machines = 2\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.verify.cot_machines, 2);
        assert_eq!(cfg.verify.cot_streams, 100);
    }

    #[test]
    fn cells_parse_each_machine_kind() {
        let text = r#"
            [bench_protocol]
            grid = [
                { n = 3, k = 4, machine = "composition" },
                { n = 2, k = 2, machine = "random", layers = 2, dim = 2, precision = 4 },
            ]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.bench_protocol.grid[0].machine, MachineChoice::Composition);
        assert_eq!(
            cfg.bench_protocol.grid[1].machine,
            MachineChoice::Random {
                layers: 2,
                dim: 2,
                precision: 4
            }
        );
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(ExperimentConfig::from_toml("[budget]\nenumeration = 0\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("suite = \"nope\"\n").is_err());
    }

    #[test]
    fn env_budget_caps() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.budget(Some("1000")).unwrap(), Budget(1000));
        assert_eq!(cfg.budget(None).unwrap(), Budget::DEFAULT);
        assert!(cfg.budget(Some("abc")).is_err());
        assert!(cfg.budget(Some("0")).is_err());
    }
}

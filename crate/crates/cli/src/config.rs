use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsetest::distributions::ModelConfig;
use sparsetest::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Estimate,
    Test,
    Lowerbound,
    Cumulants,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Test => "test",
            Command::Lowerbound => "lowerbound",
            Command::Cumulants => "cumulants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterKind {
    General,
    Sympoly,
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    GaussianHidden,
    PoissonNoniid,
    PoissonUnknownNoise,
}

fn default_trials() -> usize {
    1
}
fn default_norm_bound() -> f64 {
    1.0
}
fn default_schedule() -> String {
    "practical".into()
}
fn default_max_samples() -> u64 {
    10_000_000
}
fn default_n() -> usize {
    20
}
fn default_floor() -> f64 {
    sparsetest::testers::DEFAULT_CUMULANT_FLOOR
}
fn default_c() -> f64 {
    0.1
}
fn default_one() -> usize {
    1
}
fn default_spread() -> u32 {
    2
}

/// Weights used by `simulate`, `estimate` and `test`: either explicit, or a
/// fresh random vector per trial from the yes/no battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<Side>,
    /// Dimension of battery vectors.
    #[serde(default = "default_n")]
    pub n: usize,
    /// ‖w‖₂ of battery vectors.
    #[serde(default = "default_norm_bound")]
    pub norm: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { w: None, battery: None, n: default_n(), norm: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "C", default = "default_norm_bound")]
    pub norm_bound: f64,
    pub tester: TesterKind,
    /// `paper`, `practical` (smallest nonzero-cumulant orders) or `practical:6,4`.
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// Rows per trial; defaults to the calculator's value capped at `max_samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
    #[serde(default = "default_floor")]
    pub cumulant_floor: f64,
    #[serde(default)]
    pub weights: WeightsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub construction: ConstructionKind,
    pub n: usize,
    /// Rows per instance (t, or m for the Poisson constructions).
    pub t: usize,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_spread")]
    pub spread: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub m: usize,
    #[serde(default)]
    pub weights: WeightsConfig,
    /// Keep only labels (no x columns) in the CSV.
    #[serde(default)]
    pub labels_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Read labels from this CSV (last column) instead of sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub orders: Vec<usize>,
    #[serde(default)]
    pub weights: WeightsConfig,
    /// Symmetrize the labels first (odd cumulants then vanish).
    #[serde(default)]
    pub symmetrize: bool,
    /// When set together with `delta` and `C`, report the calculator's sample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "C", default = "default_norm_bound")]
    pub norm_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CumulantsConfig {
    pub order: usize,
}

mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("seed '{t}' is not a u64"))),
        }
    }
}

/// Everything one run needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// TOML integers are signed, so seeds past i64::MAX are written as strings.
    #[serde(default, with = "seed_repr")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Output directory; rows also go to stdout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowerbound: Option<LowerBoundConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulants: Option<CumulantsConfig>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            trials: 1,
            output: None,
            model: None,
            noise: None,
            test: None,
            lowerbound: None,
            simulate: None,
            estimate: None,
            cumulants: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// sha256 of the canonical JSON form (object keys sorted), hex encoded.
    /// The output directory is not part of the hash.
    pub fn hash(&self) -> String {
        let mut copy = self.clone();
        copy.output = None;
        // serde_json::Value keeps object keys in a sorted map.
        let value = serde_json::to_value(&copy).expect("config serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    /// Checks that the section for the command is present and no other is.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        let present = [
            (Command::Test, self.test.is_some()),
            (Command::Lowerbound, self.lowerbound.is_some()),
            (Command::Simulate, self.simulate.is_some()),
            (Command::Estimate, self.estimate.is_some()),
            (Command::Cumulants, self.cumulants.is_some()),
        ];
        for (cmd, has) in present {
            if cmd == self.command && !has {
                return Err(Error::Config(format!("command '{}' needs a [{}] section", cmd.name(), cmd.name())));
            }
            if cmd != self.command && has {
                return Err(Error::Config(format!(
                    "section [{}] does not belong to command '{}'",
                    cmd.name(),
                    self.command.name()
                )));
            }
        }
        let needs_model = !matches!(self.command, Command::Lowerbound)
            && !(self.command == Command::Estimate && self.estimate.as_ref().is_some_and(|e| e.input.is_some()));
        if needs_model && self.model.is_none() {
            return Err(Error::Config(format!("command '{}' needs a [model] section", self.command.name())));
        }
        Ok(())
    }
}

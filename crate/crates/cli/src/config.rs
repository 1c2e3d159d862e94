//! Config file schema, `--set` overrides, and resolution into core types.
//!
//! The file is TOML with sections mirroring the domain: `[model]`,
//! `[scenario]` (with its three distribution sub-tables), `[policy]`, and an
//! optional `[sweep]`. Manifests written next to result CSVs reuse the same
//! schema plus a `[run]` table, so a manifest is itself a loadable config.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use greenlink::harness::{RunOptions, SweepParameter};
use greenlink::policy::{BglConfig, Policy};
use greenlink::stochastic::CategoricalDist;
use greenlink::{ModelParams, ScenarioConfig};

/// CLI failure split by exit code: configuration/usage problems exit 2,
/// runtime problems exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSection {
    pub num_subcarriers: usize,
    #[serde(default = "default_period_length")]
    pub period_length: f64,
    pub bits_per_package: u32,
    #[serde(rename = "channel_uses_L")]
    pub channel_uses: u32,
    pub noise_variances: Vec<f64>,
    pub battery_capacity: f64,
}

fn default_period_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistSection {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub mean_power_gain: f64,
    pub n_end: u64,
    pub seed: u64,
    pub data_arrivals: DistSection,
    pub energy_arrivals: DistSection,
    pub prices: DistSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySection {
    /// "bgl" | "dop" | "cop".
    pub name: String,
    /// BGL tradeoff weight; required when name = "bgl".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default)]
    pub integer_rates: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    /// "V" | "mean_gain" | "battery_B".
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
}

fn default_replications() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileConfig {
    pub model: ModelSection,
    pub scenario: ScenarioSection,
    pub policy: PolicySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl FileConfig {
    /// Reads and parses a config (or manifest) file. Parse errors carry the
    /// toml span diagnostics.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| config_err(format!("cannot parse {}: {e}", path.display())))
    }

    /// Applies one `--set key=value` override.
    pub fn apply_set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("--set expects key=value, got '{assignment}'")))?;
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| config_err(format!("--set {key}: '{v}' is not a number ({e})")))
        };
        match key {
            "seed" => {
                self.scenario.seed = value
                    .parse()
                    .map_err(|e| config_err(format!("--set seed: {e}")))?;
            }
            "n_end" => {
                self.scenario.n_end = value
                    .parse()
                    .map_err(|e| config_err(format!("--set n_end: {e}")))?;
            }
            "policy" => self.policy.name = value.to_string(),
            "v" | "V" => self.policy.v = Some(parse_f64(value)?),
            "battery_B" | "battery_capacity" | "B" => {
                self.model.battery_capacity = parse_f64(value)?;
            }
            "mean_gain" | "mean_power_gain" => {
                self.scenario.mean_power_gain = parse_f64(value)?;
            }
            "integer_rates" => {
                self.policy.integer_rates = value
                    .parse()
                    .map_err(|e| config_err(format!("--set integer_rates: {e}")))?;
            }
            other => {
                return Err(config_err(format!(
                    "unknown --set key '{other}' (expected seed, n_end, policy, v, battery_B, \
                     mean_gain, or integer_rates)"
                )))
            }
        }
        Ok(())
    }

    /// Validates the file against the domain and produces core types.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let params = ModelParams::new(
            self.model.num_subcarriers,
            self.model.period_length,
            self.model.bits_per_package,
            self.model.channel_uses,
            self.model.noise_variances.clone(),
            self.model.battery_capacity,
        )
        .map_err(|e| config_err(format!("[model]: {e}")))?;

        let dist = |section: &DistSection, name: &str| {
            CategoricalDist::new(section.values.clone(), section.probs.clone())
                .map_err(|e| config_err(format!("[scenario.{name}]: {e}")))
        };
        let scenario = ScenarioConfig {
            mean_power_gain: self.scenario.mean_power_gain,
            data_arrivals: dist(&self.scenario.data_arrivals, "data_arrivals")?,
            energy_arrivals: dist(&self.scenario.energy_arrivals, "energy_arrivals")?,
            prices: dist(&self.scenario.prices, "prices")?,
            n_end: self.scenario.n_end,
            seed: self.scenario.seed,
        };
        scenario
            .validate()
            .map_err(|e| config_err(format!("[scenario]: {e}")))?;

        let policy = match self.policy.name.as_str() {
            "bgl" => {
                let v = self.policy.v.ok_or_else(|| {
                    config_err("[policy]: name = \"bgl\" requires a tradeoff weight v")
                })?;
                Policy::Bgl(BglConfig::new(v).map_err(|e| config_err(format!("[policy]: {e}")))?)
            }
            "dop" => Policy::Dop,
            "cop" => Policy::Cop,
            other => {
                return Err(config_err(format!(
                    "[policy]: unknown policy '{other}' (expected bgl | dop | cop)"
                )))
            }
        };

        let sweep = match &self.sweep {
            None => None,
            Some(section) => {
                let parameter: SweepParameter = section
                    .parameter
                    .parse()
                    .map_err(|e| config_err(format!("[sweep]: {e}")))?;
                Some(SweepPlan {
                    parameter,
                    values: section.values.clone(),
                    replications: section.replications,
                })
            }
        };

        Ok(Resolved {
            params,
            scenario,
            policy,
            options: RunOptions {
                integer_rates: self.policy.integer_rates,
                trajectory_stride: None,
            },
            sweep,
        })
    }
}

/// A resolved sweep request.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub replications: u32,
}

/// Core-typed view of a config file after overrides.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParams,
    pub scenario: ScenarioConfig,
    pub policy: Policy,
    pub options: RunOptions,
    pub sweep: Option<SweepPlan>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn reference_config() -> FileConfig {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml");
        FileConfig::load(Path::new(path)).unwrap()
    }

    #[test]
    fn reference_config_resolves() {
        let resolved = reference_config().resolve().unwrap();
        assert_eq!(resolved.params.num_subcarriers, 3);
        assert_eq!(resolved.scenario.n_end, 1_000_000);
        assert_eq!(resolved.policy.name(), "bgl");
        let sweep = resolved.sweep.unwrap();
        assert_eq!(sweep.parameter, SweepParameter::TradeoffV);
        assert_eq!(sweep.values.len(), 8);
    }

    #[test]
    fn overrides_hit_the_right_fields() {
        let mut cfg = reference_config();
        cfg.apply_set("policy=cop").unwrap();
        cfg.apply_set("seed=7").unwrap();
        cfg.apply_set("n_end=500").unwrap();
        cfg.apply_set("battery_B=1000").unwrap();
        cfg.apply_set("mean_gain=0.5").unwrap();
        cfg.apply_set("integer_rates=true").unwrap();
        assert_eq!(cfg.policy.name, "cop");
        assert_eq!(cfg.scenario.seed, 7);
        assert_eq!(cfg.scenario.n_end, 500);
        assert_eq!(cfg.model.battery_capacity, 1000.0);
        assert_eq!(cfg.scenario.mean_power_gain, 0.5);
        assert!(cfg.policy.integer_rates);
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.policy.name(), "cop");
        assert!(resolved.options.integer_rates);
    }

    #[test]
    fn unknown_override_and_bad_values_are_config_errors() {
        let mut cfg = reference_config();
        assert!(matches!(cfg.apply_set("bogus=1"), Err(CliError::Config(_))));
        assert!(matches!(
            cfg.apply_set("seed=abc"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            cfg.apply_set("noequals"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn bgl_without_v_is_rejected() {
        let mut cfg = reference_config();
        cfg.policy.v = None;
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn parse_errors_carry_location_diagnostics() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[model]\nnum_subcarriers = \"three\"").unwrap();
        let err = FileConfig::load(file.path()).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "diagnostic lacks location: {msg}");
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let mut cfg = reference_config();
        cfg.scenario.prices.probs = vec![0.3, 0.6];
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }
}

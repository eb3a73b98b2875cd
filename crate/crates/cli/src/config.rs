//! JSON experiment configuration.
//!
//! Every section is optional at parse time; each subcommand asks for the keys
//! it needs and reports the first missing one by name.

use std::path::{Path, PathBuf};

use gradband::optimizer::GaussianComponent;
use gradband::{BaselineKind, PolicySpec, PriorSpec};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: Option<u32>,
    pub prior: Option<PriorSpec>,
    pub policy: Option<PolicyEntry>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tune: Option<TuneSection>,
    pub eval: Option<EvalSection>,
    pub sweep: Option<SweepSection>,
    pub variance: Option<VarianceSection>,
    pub bench: Option<BenchSection>,
    pub concavity: Option<ConcavitySection>,
}

/// A policy given either by bare name (`"ts"`) or as a full spec object
/// (`{"name": "ucbv", "zeta": 1.0}`).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolicyEntry {
    Name(String),
    Spec(PolicySpec),
}

impl PolicyEntry {
    pub fn resolve(&self) -> Result<PolicySpec, CliError> {
        match self {
            PolicyEntry::Spec(spec) => Ok(spec.clone()),
            PolicyEntry::Name(name) => PolicySpec::from_name(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown policy `{name}` (known: {})",
                    PolicySpec::NAMES.join(", ")
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub iterations: usize,
    pub batch_size: usize,
    #[serde(default = "default_baseline")]
    pub baseline: BaselineKind,
    pub calibration_batches: Option<usize>,
    pub safety_factor: Option<f64>,
    /// Clip batch gradients to norm `clip * c`.
    pub clip: Option<f64>,
    /// Report the mean of the last this many iterates.
    #[serde(default)]
    pub average_tail: usize,
    /// Evaluate the current policy every this many iterations.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_baseline() -> BaselineKind {
    BaselineKind::SelfRun
}

fn default_eval_every() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub n_eval: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub theta_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSection {
    pub theta_grid: Vec<f64>,
    #[serde(default = "all_baselines")]
    pub baselines: Vec<BaselineKind>,
    pub m: usize,
}

fn all_baselines() -> Vec<BaselineKind> {
    BaselineKind::ALL.to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub policies: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcavitySection {
    pub mixture: Vec<GaussianComponent>,
    /// Defaults to `1, 1.5, ..., floor(n / 2)`.
    pub theta_grid: Option<Vec<f64>>,
    /// Number of evenly spaced grid points checked by simulation.
    #[serde(default = "default_mc_points")]
    pub mc_points: usize,
    #[serde(default = "default_mc_rollouts")]
    pub mc_rollouts: usize,
}

fn default_mc_points() -> usize {
    5
}

fn default_mc_rollouts() -> usize {
    2000
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match cfg.schema {
            Some(SCHEMA_VERSION) => Ok(cfg),
            Some(v) => Err(CliError::Config(format!(
                "unsupported schema version {v} (expected {SCHEMA_VERSION})"
            ))),
            None => Err(missing("schema")),
        }
    }

    pub fn prior(&self) -> Result<&PriorSpec, CliError> {
        let prior = self.prior.as_ref().ok_or_else(|| missing("prior"))?;
        prior.validate().map_err(|e| CliError::Config(format!("prior: {e}")))?;
        Ok(prior)
    }

    pub fn policy(&self) -> Result<PolicySpec, CliError> {
        self.policy.as_ref().ok_or_else(|| missing("policy"))?.resolve()
    }

    pub fn n(&self) -> Result<usize, CliError> {
        match self.n {
            Some(0) => Err(CliError::Config("n must be positive".into())),
            Some(n) => Ok(n),
            None => Err(missing("n")),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| missing("out"))
    }

    pub fn n_eval(&self) -> usize {
        self.eval.as_ref().map_or(gradband::evaluation::DEFAULT_N_EVAL, |e| e.n_eval)
    }

    pub fn section<'a, T>(&self, name: &str, value: &'a Option<T>) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| missing(name))
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::parse(
            r#"{
                "schema": 1,
                "prior": {"family": "beta_beta", "k": 10},
                "policy": {"name": "softelim", "theta": 1.0},
                "n": 1000,
                "seed": 7,
                "tune": {"iterations": 5, "batch_size": 10, "baseline": "opt"},
                "bench": {"policies": ["ts", {"name": "ucbv", "zeta": 1.0}]}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.prior().unwrap(), &PriorSpec::BetaBeta { k: 10, v: 4.0 });
        assert_eq!(cfg.policy().unwrap(), PolicySpec::SoftElim { theta: 1.0 });
        let tune = cfg.tune.as_ref().unwrap();
        assert_eq!((tune.baseline, tune.eval_every), (BaselineKind::Opt, 10));
        let policies: Vec<_> = cfg.bench.as_ref().unwrap().policies.iter().map(|p| p.resolve().unwrap()).collect();
        assert_eq!(policies, vec![PolicySpec::Ts, PolicySpec::UcbV { zeta: 1.0 }]);
        assert_eq!(cfg.n_eval(), 1000);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "priors": {}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "tune": {"iterations": 1, "batch_size": 1, "lr": 2}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 2}"#).is_err());
        let err = ExperimentConfig::parse("{}").unwrap_err();
        assert!(err.to_string().contains("`schema`"));
    }

    #[test]
    fn missing_and_unknown_names_are_reported() {
        let cfg = ExperimentConfig::parse(r#"{"schema": 1, "policy": "gittins"}"#).unwrap();
        assert!(cfg.prior().unwrap_err().to_string().contains("`prior`"));
        assert!(cfg.policy().unwrap_err().to_string().contains("gittins"));
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "prior": {"family": "cauchy"}}"#).is_err());
    }
}

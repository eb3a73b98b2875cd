//! Prior distributions over bandit instances and per-arm reward laws.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bandit::{InstanceSpec, RewardMatrix};
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Variance control of beta rewards used when a config does not set one.
pub const DEFAULT_BETA_CONCENTRATION: f64 = 4.0;

/// Reward law of a single arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ArmDistribution {
    Bernoulli { mean: f64 },
    /// `Beta(v * mean, v * (1 - mean))`.
    Beta { mean: f64, v: f64 },
    /// Unclamped normal rewards; only for the Gaussian explore-then-commit
    /// experiments.
    Gaussian { mean: f64, sd: f64 },
}

impl ArmDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            ArmDistribution::Bernoulli { mean }
            | ArmDistribution::Beta { mean, .. }
            | ArmDistribution::Gaussian { mean, .. } => mean,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, ArmDistribution::Gaussian { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmDistribution::Bernoulli { mean } if !(0.0..=1.0).contains(&mean) => {
                Err(invalid(format!("Bernoulli mean {mean} outside [0, 1]")))
            }
            ArmDistribution::Beta { mean, v } => {
                if !(mean > 0.0 && mean < 1.0) {
                    Err(invalid(format!("beta mean {mean} must lie in (0, 1)")))
                } else if !(v > 0.0 && v.is_finite()) {
                    Err(invalid(format!("beta concentration {v} must be positive")))
                } else {
                    Ok(())
                }
            }
            ArmDistribution::Gaussian { mean, sd } if !(mean.is_finite() && sd > 0.0) => {
                Err(invalid(format!("Gaussian({mean}, {sd}) is not a valid law")))
            }
            _ => Ok(()),
        }
    }

    /// Fills `out` with independent draws.
    pub fn fill(&self, rng: &mut Stream, out: &mut [f64]) {
        match *self {
            ArmDistribution::Bernoulli { mean } => {
                for y in out {
                    *y = if rng.random::<f64>() < mean { 1.0 } else { 0.0 };
                }
            }
            ArmDistribution::Beta { mean, v } => {
                let law = Beta::new(v * mean, v * (1.0 - mean)).expect("validated beta law");
                for y in out {
                    *y = law.sample(rng);
                }
            }
            ArmDistribution::Gaussian { mean, sd } => {
                for y in out {
                    let z: f64 = StandardNormal.sample(rng);
                    *y = mean + sd * z;
                }
            }
        }
    }
}

/// A prior over problem instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Two equally likely Bernoulli instances, means (0.6, 0.4) and (0.4, 0.6).
    TwoPointK2,
    /// Means i.i.d. uniform, Bernoulli rewards.
    BetaBernoulli { k: usize },
    /// Means i.i.d. uniform, `Beta(v mu, v (1 - mu))` rewards.
    BetaBeta {
        k: usize,
        #[serde(default = "default_v")]
        v: f64,
    },
    /// Two equally likely instances where arm 0 reveals which of arms 1 and 2
    /// is optimal and the remaining arms sit at 0.7.
    Distractor { k: usize },
    /// A single two-armed Gaussian instance with unit variance.
    GaussianPair { mu1: f64, mu2: f64 },
}

fn default_v() -> f64 {
    DEFAULT_BETA_CONCENTRATION
}

impl PriorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::TwoPointK2 => "two_point_k2",
            PriorSpec::BetaBernoulli { .. } => "beta_bernoulli",
            PriorSpec::BetaBeta { .. } => "beta_beta",
            PriorSpec::Distractor { .. } => "distractor",
            PriorSpec::GaussianPair { .. } => "gaussian_pair",
        }
    }

    pub fn num_arms(&self) -> usize {
        match *self {
            PriorSpec::TwoPointK2 | PriorSpec::GaussianPair { .. } => 2,
            PriorSpec::BetaBernoulli { k }
            | PriorSpec::BetaBeta { k, .. }
            | PriorSpec::Distractor { k } => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::BetaBernoulli { k } | PriorSpec::BetaBeta { k, .. } if k < 2 => {
                Err(invalid(format!("{} needs k >= 2, got {k}", self.name())))
            }
            PriorSpec::BetaBeta { v, .. } if !(v > 0.0 && v.is_finite()) => {
                Err(invalid(format!("beta_beta concentration {v} must be positive")))
            }
            PriorSpec::Distractor { k } if k < 3 => {
                Err(invalid(format!("distractor needs k >= 3, got {k}")))
            }
            PriorSpec::GaussianPair { mu1, mu2 } if !(mu1.is_finite() && mu2.is_finite()) => {
                Err(invalid("gaussian_pair means must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Expected arm means under the prior.
    pub fn mean_of_means(&self) -> Vec<f64> {
        match *self {
            PriorSpec::TwoPointK2 => vec![0.5, 0.5],
            PriorSpec::BetaBernoulli { k } | PriorSpec::BetaBeta { k, .. } => vec![0.5; k],
            PriorSpec::Distractor { k } => {
                let mut m = vec![0.7; k];
                m[0] = 0.4;
                m[1] = 0.8;
                m[2] = 0.8;
                m
            }
            PriorSpec::GaussianPair { mu1, mu2 } => vec![mu1, mu2],
        }
    }

    pub fn sample_instance(&self, rng: &mut Stream) -> InstanceSpec {
        sample_instance(self, rng)
    }
}

/// Draws one instance from `prior`.
pub fn sample_instance(prior: &PriorSpec, rng: &mut Stream) -> InstanceSpec {
    let bern = |mean: f64| ArmDistribution::Bernoulli { mean };
    let arms: Vec<ArmDistribution> = match *prior {
        PriorSpec::TwoPointK2 => {
            if rng.random::<f64>() < 0.5 {
                vec![bern(0.6), bern(0.4)]
            } else {
                vec![bern(0.4), bern(0.6)]
            }
        }
        PriorSpec::BetaBernoulli { k } => (0..k).map(|_| bern(uniform_open(rng))).collect(),
        PriorSpec::BetaBeta { k, v } => (0..k)
            .map(|_| ArmDistribution::Beta {
                mean: uniform_open(rng),
                v,
            })
            .collect(),
        PriorSpec::Distractor { k } => {
            let head: [f64; 3] = if rng.random::<f64>() < 0.5 {
                [0.6, 0.9, 0.7]
            } else {
                [0.2, 0.7, 0.9]
            };
            (0..k)
                .map(|i| bern(if i < 3 { head[i] } else { 0.7 }))
                .collect()
        }
        PriorSpec::GaussianPair { mu1, mu2 } => vec![
            ArmDistribution::Gaussian { mean: mu1, sd: 1.0 },
            ArmDistribution::Gaussian { mean: mu2, sd: 1.0 },
        ],
    };
    InstanceSpec::new(arms).expect("prior families produce valid instances")
}

// Beta(1, 1) restricted to the open interval, so beta reward laws stay proper.
fn uniform_open(rng: &mut Stream) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws the full `k x n` reward matrix of `instance`.
pub fn sample_rewards(instance: &InstanceSpec, n: usize, rng: &mut Stream) -> Result<RewardMatrix> {
    let k = instance.num_arms();
    if n < k {
        return Err(invalid(format!("horizon {n} is shorter than the arm count {k}")));
    }
    let mut values = vec![0.0; k * n];
    for (arm, row) in instance.arms().iter().zip(values.chunks_exact_mut(n)) {
        arm.fill(rng, row);
    }
    if instance.arms().iter().all(ArmDistribution::is_bounded) {
        RewardMatrix::new(k, n, values)
    } else {
        RewardMatrix::unbounded(k, n, values)
    }
}

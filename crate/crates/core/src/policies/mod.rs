//! Bandit policies.
//!
//! Three policies are differentiable in their scalar parameter: [`Exp3State`],
//! [`SoftElimState`] and the randomized explore-then-commit [`EtcState`]. The
//! rest ([`Ucb1State`], [`ThompsonState`], [`UcbVState`]) are fixed benchmarks.
//! All arg-max decisions break ties towards the lowest arm index.

mod etc;
mod exp3;
mod softelim;
mod thompson;
mod ucb;

pub use etc::{etc_grad_log_prob, EtcScore, EtcState};
pub use exp3::{exp3_grad_log_prob, exp3_probs, exp3_theoretical_theta, Exp3State};
pub use softelim::{
    softelim_grad_log_prob, softelim_probs, softelim_statistic, SoftElimState, EXPONENT_CAP,
};
pub use thompson::{bernoulli_round, ts_bernoulli_action, ThompsonState};
pub use ucb::{ucb1_action, ucbv_action, ucbv_action_scaled, Ucb1State, UcbVState, UCBV_ZETA};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::InstanceSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// Feasible parameter set of Exp3 during optimization.
pub const EXP3_THETA_RANGE: (f64, f64) = (1e-3, 1.0);
/// Feasible parameter set of SoftElim during optimization.
pub const SOFTELIM_THETA_RANGE: (f64, f64) = (1e-2, 1e3);

/// A bandit policy driven round by round by [`crate::bandit::rollout`].
pub trait Policy {
    fn num_arms(&self) -> usize;

    /// Number of optimized parameters; 0 for fixed policies.
    fn param_dim(&self) -> usize {
        0
    }

    /// Forgets all statistics gathered so far.
    fn reset(&mut self);

    /// Chooses the arm of round `t` (1-based). When `grad` is given, it
    /// receives the gradient of the log-probability of the returned choice
    /// with respect to the parameters.
    fn select(&mut self, t: usize, rng: &mut Stream, grad: Option<&mut [f64]>) -> usize;

    fn update(&mut self, arm: usize, reward: f64, rng: &mut Stream);
}

/// Policies with closed-form pull probabilities and score gradients.
pub trait Differentiable: Policy {
    fn params(&self) -> Vec<f64>;

    /// Pull probabilities for the next round given the statistics so far.
    fn action_probs(&self) -> Vec<f64>;

    /// Gradient of the log pull probability of `arm` in the next round.
    fn grad_log_prob(&self, arm: usize) -> Vec<f64>;
}

/// Draws an index from a probability vector.
pub(crate) fn sample_index(probs: &[f64], rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `acc` marginally below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Always pulls the same arm.
#[derive(Debug, Clone)]
pub struct FixedArm {
    k: usize,
    arm: usize,
}

impl FixedArm {
    pub fn new(k: usize, arm: usize) -> Self {
        assert!(arm < k, "arm {arm} out of range for {k} arms");
        Self { k, arm }
    }
}

impl Policy for FixedArm {
    fn num_arms(&self) -> usize {
        self.k
    }
    fn reset(&mut self) {}
    fn select(&mut self, _t: usize, _rng: &mut Stream, _grad: Option<&mut [f64]>) -> usize {
        self.arm
    }
    fn update(&mut self, _arm: usize, _reward: f64, _rng: &mut Stream) {}
}

/// Pulls arms uniformly at random.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    k: usize,
}

impl UniformRandom {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl Policy for UniformRandom {
    fn num_arms(&self) -> usize {
        self.k
    }
    fn reset(&mut self) {}
    fn select(&mut self, _t: usize, rng: &mut Stream, _grad: Option<&mut [f64]>) -> usize {
        rng.random_range(0..self.k)
    }
    fn update(&mut self, _arm: usize, _reward: f64, _rng: &mut Stream) {}
}

/// Per-rollout state of any supported policy.
#[derive(Debug, Clone)]
pub enum PolicyState {
    Exp3(Exp3State),
    SoftElim(SoftElimState),
    Etc(EtcState),
    Ucb1(Ucb1State),
    Thompson(ThompsonState),
    UcbV(UcbVState),
    Fixed(FixedArm),
    Uniform(UniformRandom),
}

macro_rules! dispatch {
    ($self:expr, $p:ident => $body:expr) => {
        match $self {
            PolicyState::Exp3($p) => $body,
            PolicyState::SoftElim($p) => $body,
            PolicyState::Etc($p) => $body,
            PolicyState::Ucb1($p) => $body,
            PolicyState::Thompson($p) => $body,
            PolicyState::UcbV($p) => $body,
            PolicyState::Fixed($p) => $body,
            PolicyState::Uniform($p) => $body,
        }
    };
}

impl Policy for PolicyState {
    fn num_arms(&self) -> usize {
        dispatch!(self, p => p.num_arms())
    }
    fn param_dim(&self) -> usize {
        dispatch!(self, p => p.param_dim())
    }
    fn reset(&mut self) {
        dispatch!(self, p => p.reset())
    }
    #[inline]
    fn select(&mut self, t: usize, rng: &mut Stream, grad: Option<&mut [f64]>) -> usize {
        dispatch!(self, p => p.select(t, rng, grad))
    }
    #[inline]
    fn update(&mut self, arm: usize, reward: f64, rng: &mut Stream) {
        dispatch!(self, p => p.update(arm, reward, rng))
    }
}

/// Box constraints on policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "bound vectors",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(invalid("every lower bound must not exceed its upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn scalar(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| (l..=u).contains(&v))
    }

    /// Clamps `x` in place; reports whether any coordinate hit the lower or
    /// upper bound respectively.
    pub fn project(&self, x: &mut [f64]) -> (bool, bool) {
        let (mut low, mut high) = (false, false);
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            if *v < *l {
                *v = *l;
                low = true;
            } else if *v > *u {
                *v = *u;
                high = true;
            }
        }
        (low, high)
    }
}

fn default_theta() -> f64 {
    1.0
}

fn default_zeta() -> f64 {
    UCBV_ZETA
}

/// Named policy configuration; turned into a [`PolicyState`] per rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Exp3 with learning rate tied to the exploration parameter.
    Exp3 {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    /// Exp3 with the worst-case tuned exploration `min(1, sqrt(K ln K / ((e-1) n)))`.
    Exp3Theory,
    #[serde(rename = "softelim")]
    SoftElim {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    /// Randomized explore-then-commit (two arms).
    Etc {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Ucb1,
    Ts,
    /// UCB-V with exploration function `zeta ln t`.
    #[serde(rename = "ucbv")]
    UcbV {
        #[serde(default = "default_zeta")]
        zeta: f64,
    },
    /// Pulls the best arm of the instance; needs the instance to build.
    Oracle,
    Uniform,
    Fixed { arm: usize },
}

impl PolicySpec {
    pub const NAMES: [&'static str; 10] = [
        "exp3",
        "exp3_theory",
        "softelim",
        "etc",
        "ucb1",
        "ts",
        "ucbv",
        "oracle",
        "uniform",
        "fixed",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Exp3 { .. } => "exp3",
            PolicySpec::Exp3Theory => "exp3_theory",
            PolicySpec::SoftElim { .. } => "softelim",
            PolicySpec::Etc { .. } => "etc",
            PolicySpec::Ucb1 => "ucb1",
            PolicySpec::Ts => "ts",
            PolicySpec::UcbV { .. } => "ucbv",
            PolicySpec::Oracle => "oracle",
            PolicySpec::Uniform => "uniform",
            PolicySpec::Fixed { .. } => "fixed",
        }
    }

    /// Policy without parameters (or with its default parameter) by name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp3" => PolicySpec::Exp3 { theta: 1.0 },
            "exp3_theory" => PolicySpec::Exp3Theory,
            "softelim" => PolicySpec::SoftElim { theta: 1.0 },
            "etc" => PolicySpec::Etc { theta: 1.0 },
            "ucb1" => PolicySpec::Ucb1,
            "ts" => PolicySpec::Ts,
            "ucbv" => PolicySpec::UcbV { zeta: UCBV_ZETA },
            "oracle" => PolicySpec::Oracle,
            "uniform" => PolicySpec::Uniform,
            _ => return None,
        })
    }

    pub fn is_differentiable(&self) -> bool {
        self.params().is_some()
    }

    pub fn params(&self) -> Option<Vec<f64>> {
        match *self {
            PolicySpec::Exp3 { theta } | PolicySpec::SoftElim { theta } | PolicySpec::Etc { theta } => {
                Some(vec![theta])
            }
            _ => None,
        }
    }

    /// Same policy family with new parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let theta = match params {
            [theta] => *theta,
            _ if self.is_differentiable() => {
                return Err(Error::DimensionMismatch {
                    what: "policy parameters",
                    expected: 1,
                    actual: params.len(),
                })
            }
            _ => return Err(invalid(format!("policy `{}` has no parameters", self.name()))),
        };
        Ok(match self {
            PolicySpec::Exp3 { .. } => PolicySpec::Exp3 { theta },
            PolicySpec::SoftElim { .. } => PolicySpec::SoftElim { theta },
            PolicySpec::Etc { .. } => PolicySpec::Etc { theta },
            _ => return Err(invalid(format!("policy `{}` has no parameters", self.name()))),
        })
    }

    /// Feasible parameter box for horizon `n`.
    pub fn bounds(&self, n: usize) -> Option<Bounds> {
        let (lo, hi) = match self {
            PolicySpec::Exp3 { .. } => EXP3_THETA_RANGE,
            PolicySpec::SoftElim { .. } => SOFTELIM_THETA_RANGE,
            PolicySpec::Etc { .. } => (1.0, (n / 2) as f64),
            _ => return None,
        };
        Bounds::scalar(lo, hi).ok()
    }

    /// Fresh state for a `k`-armed problem with horizon `n`. The oracle needs
    /// `instance`; other policies ignore it.
    pub fn build(&self, k: usize, n: usize, instance: Option<&InstanceSpec>) -> Result<PolicyState> {
        if k == 0 {
            return Err(invalid("policy needs at least one arm"));
        }
        Ok(match *self {
            PolicySpec::Exp3 { theta } => PolicyState::Exp3(Exp3State::new(k, theta)?),
            PolicySpec::Exp3Theory => {
                PolicyState::Exp3(Exp3State::new(k, exp3_theoretical_theta(k, n))?)
            }
            PolicySpec::SoftElim { theta } => PolicyState::SoftElim(SoftElimState::new(k, theta)?),
            PolicySpec::Etc { theta } => {
                if k != 2 {
                    return Err(invalid("explore-then-commit is defined for two arms"));
                }
                PolicyState::Etc(EtcState::new(theta, n)?)
            }
            PolicySpec::Ucb1 => PolicyState::Ucb1(Ucb1State::new(k)),
            PolicySpec::Ts => PolicyState::Thompson(ThompsonState::new(k)),
            PolicySpec::UcbV { zeta } => {
                if !(zeta > 0.0 && zeta.is_finite()) {
                    return Err(invalid(format!("UCB-V zeta {zeta} must be positive")));
                }
                PolicyState::UcbV(UcbVState::with_zeta(k, zeta))
            }
            PolicySpec::Oracle => {
                let inst = instance.ok_or_else(|| invalid("oracle policy needs the instance"))?;
                if inst.num_arms() != k {
                    return Err(Error::DimensionMismatch {
                        what: "oracle instance arms",
                        expected: k,
                        actual: inst.num_arms(),
                    });
                }
                PolicyState::Fixed(FixedArm::new(k, inst.best_arm()))
            }
            PolicySpec::Uniform => PolicyState::Uniform(UniformRandom::new(k)),
            PolicySpec::Fixed { arm } => {
                if arm >= k {
                    return Err(invalid(format!("fixed arm {arm} out of range for {k} arms")));
                }
                PolicyState::Fixed(FixedArm::new(k, arm))
            }
        })
    }
}

//! Instances, pre-sampled reward matrices and rollouts.

use crate::error::{invalid, Error, Result};
use crate::policies::Policy;
use crate::priors::ArmDistribution;
use crate::rng::Stream;

/// Realized rewards of every arm in every round, `k` rows by `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    k: usize,
    n: usize,
    values: Vec<f64>,
}

impl RewardMatrix {
    /// Row-major `values` (arm-major). Every entry must lie in `[0, 1]`.
    pub fn new(k: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let m = Self::unbounded(k, n, values)?;
        for arm in 0..k {
            for (t, &v) in m.row(arm).iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::RewardOutOfRange {
                        arm,
                        round: t,
                        value: v,
                    });
                }
            }
        }
        Ok(m)
    }

    /// Like [`RewardMatrix::new`] but only requires finite entries. Used for
    /// Gaussian instances, whose rewards are not clamped.
    pub fn unbounded(k: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(invalid("reward matrix needs at least one arm and one round"));
        }
        if values.len() != k * n {
            return Err(Error::DimensionMismatch {
                what: "reward matrix entries",
                expected: k * n,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite reward at arm {}, round {}",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { k, n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "reward matrix row length",
                expected: n,
                actual: bad.len(),
            });
        }
        Self::new(k, n, rows.concat())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, arm: usize, t: usize) -> f64 {
        self.values[arm * self.n + t]
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.values[arm * self.n..(arm + 1) * self.n]
    }
}

/// One problem instance: the reward law of every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    arms: Vec<ArmDistribution>,
    means: Vec<f64>,
    best_arm: usize,
}

impl InstanceSpec {
    pub fn new(arms: Vec<ArmDistribution>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::Empty("instance arms"));
        }
        for arm in &arms {
            arm.validate()?;
        }
        let means: Vec<f64> = arms.iter().map(ArmDistribution::mean).collect();
        let best_arm = argmax(&means);
        Ok(Self {
            arms,
            means,
            best_arm,
        })
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Lowest index among the arms with the highest mean.
    pub fn best_arm(&self) -> usize {
        self.best_arm
    }

    pub fn has_unique_best(&self) -> bool {
        let best = self.means[self.best_arm];
        self.means.iter().filter(|&&m| m == best).count() == 1
    }

    /// Gap of every arm to the best mean; zero for the best arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.means[self.best_arm];
        self.means.iter().map(|m| best - m).collect()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Pulled arms, realized rewards and (optionally) per-round score gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pulled: Vec<usize>,
    rewards: Vec<f64>,
    dim: usize,
    grads: Option<Vec<f64>>,
}

impl RolloutTrace {
    /// Assembles a trace by hand; `grads` holds `pulled.len()` rows of `dim`
    /// entries.
    pub fn from_parts(
        pulled: Vec<usize>,
        rewards: Vec<f64>,
        dim: usize,
        grads: Option<Vec<f64>>,
    ) -> Result<Self> {
        if pulled.len() != rewards.len() {
            return Err(Error::DimensionMismatch {
                what: "trace rewards",
                expected: pulled.len(),
                actual: rewards.len(),
            });
        }
        if let Some(g) = &grads {
            if g.len() != pulled.len() * dim {
                return Err(Error::DimensionMismatch {
                    what: "trace gradient entries",
                    expected: pulled.len() * dim,
                    actual: g.len(),
                });
            }
        }
        Ok(Self {
            pulled,
            rewards,
            dim,
            grads,
        })
    }

    pub fn len(&self) -> usize {
        self.pulled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulled.is_empty()
    }

    pub fn pulled(&self) -> &[usize] {
        &self.pulled
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Dimension of the policy parameters the gradients refer to.
    pub fn param_dim(&self) -> usize {
        self.dim
    }

    pub fn has_grads(&self) -> bool {
        self.grads.is_some()
    }

    /// Score gradient stored for round `t` (0-based).
    pub fn grad(&self, t: usize) -> Option<&[f64]> {
        self.grads
            .as_ref()
            .map(|g| &g[t * self.dim..(t + 1) * self.dim])
    }
}

/// Runs `policy` on the pre-sampled rewards `y`.
///
/// The policy is reset first. In round `t` the arm is drawn from the policy's
/// current distribution, its reward is read from `y`, and the policy is
/// updated. With `record_grads` the score gradient of the chosen arm is stored
/// for every round.
pub fn rollout<P: Policy + ?Sized>(
    policy: &mut P,
    y: &RewardMatrix,
    rng: &mut Stream,
    record_grads: bool,
) -> Result<RolloutTrace> {
    if policy.num_arms() != y.k() {
        return Err(Error::DimensionMismatch {
            what: "policy arms vs reward matrix rows",
            expected: y.k(),
            actual: policy.num_arms(),
        });
    }
    policy.reset();
    let n = y.n();
    let dim = policy.param_dim();
    let mut pulled = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut grads = record_grads.then(|| vec![0.0; n * dim]);
    for t in 0..n {
        let grad = grads.as_mut().map(|g| &mut g[t * dim..(t + 1) * dim]);
        let arm = policy.select(t + 1, rng, grad);
        let reward = y.get(arm, t);
        policy.update(arm, reward, rng);
        pulled.push(arm);
        rewards.push(reward);
    }
    Ok(RolloutTrace {
        pulled,
        rewards,
        dim,
        grads,
    })
}

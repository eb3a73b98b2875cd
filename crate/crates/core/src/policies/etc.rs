use rand::Rng;

use super::Policy;
use crate::bandit::argmax;
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Score of the exploration-length coin, `d/dtheta log P(Z = z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtcScore {
    pub value: f64,
    /// Set when `theta` is an integer: `Z` is then deterministic and the
    /// score is undefined (reported as 0).
    pub degenerate: bool,
}

/// Score of `Z ~ Ber(theta - floor(theta))` at outcome `z`.
pub fn etc_grad_log_prob(theta: f64, z: bool) -> EtcScore {
    let frac = theta - theta.floor();
    if frac == 0.0 {
        return EtcScore {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = if z { 1.0 / frac } else { -1.0 / (1.0 - frac) };
    EtcScore {
        value,
        degenerate: false,
    }
}

/// Randomized explore-then-commit on two arms.
///
/// Each arm is explored `floor(theta) + Z` times with `Z ~ Ber(theta -
/// floor(theta))` (alternating arm 0, arm 1), after which the policy commits
/// to the arm with the higher exploration mean, arm 0 on ties. The coin `Z`
/// is the only source of dependence on `theta`, so the whole score gradient
/// is attributed to round 1.
#[derive(Debug, Clone)]
pub struct EtcState {
    theta: f64,
    horizon: usize,
    z: Option<bool>,
    means: [f64; 2],
    counts: [u64; 2],
    committed: Option<usize>,
    rounds: usize,
}

impl EtcState {
    pub fn new(theta: f64, horizon: usize) -> Result<Self> {
        let upper = (horizon / 2) as f64;
        if !(theta >= 1.0 && theta <= upper) {
            return Err(invalid(format!(
                "explore-then-commit theta {theta} must lie in [1, {upper}]"
            )));
        }
        Ok(Self {
            theta,
            horizon,
            z: None,
            means: [0.0; 2],
            counts: [0; 2],
            committed: None,
            rounds: 0,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Pulls per arm in the exploration phase, once the coin has been drawn.
    pub fn explore_per_arm(&self) -> Option<usize> {
        self.z.map(|z| self.theta.floor() as usize + usize::from(z))
    }

    pub fn committed_arm(&self) -> Option<usize> {
        self.committed
    }

    /// Score of the coin drawn in this rollout.
    pub fn score(&self) -> Option<EtcScore> {
        self.z.map(|z| etc_grad_log_prob(self.theta, z))
    }
}

impl Policy for EtcState {
    fn num_arms(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) {
        self.z = None;
        self.means = [0.0; 2];
        self.counts = [0; 2];
        self.committed = None;
        self.rounds = 0;
    }

    fn select(&mut self, _t: usize, rng: &mut Stream, grad: Option<&mut [f64]>) -> usize {
        let first = self.z.is_none();
        if first {
            let frac = self.theta - self.theta.floor();
            self.z = Some(frac > 0.0 && rng.random::<f64>() < frac);
        }
        if let Some(g) = grad {
            g[0] = if first {
                self.score().map_or(0.0, |s| s.value)
            } else {
                0.0
            };
        }
        let explore = self.explore_per_arm().unwrap_or(0);
        if self.rounds < 2 * explore {
            return self.rounds % 2;
        }
        if self.committed.is_none() {
            self.committed = Some(argmax(&self.means));
        }
        self.committed.unwrap_or(0)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut Stream) {
        self.counts[arm] += 1;
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm] as f64;
        self.rounds += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{rollout, RewardMatrix};
    use crate::rng::{Purpose, SeedPlan};

    #[test]
    fn coin_scores() {
        assert_eq!(etc_grad_log_prob(2.5, true).value, 2.0);
        assert_eq!(etc_grad_log_prob(2.5, false).value, -2.0);
        let d = etc_grad_log_prob(3.0, true);
        assert_eq!((d.value, d.degenerate), (0.0, true));
    }

    #[test]
    fn score_has_zero_mean() {
        for theta in [1.1, 2.5, 7.9, 3.25] {
            let p = theta - f64::floor(theta);
            let e = p * etc_grad_log_prob(theta, true).value
                + (1.0 - p) * etc_grad_log_prob(theta, false).value;
            assert!(e.abs() < 1e-12, "theta {theta}: {e}");
        }
    }

    #[test]
    fn integer_theta_is_deterministic_explore_then_commit() {
        // Arm 1 wins the exploration phase; commit is to arm 1 afterwards.
        let y = RewardMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let mut st = EtcState::new(3.0, 10).unwrap();
        for seed in 0..20 {
            let mut rng = SeedPlan::new(seed).stream(0, 0, Purpose::Rollout);
            let tr = rollout(&mut st, &y, &mut rng, true).unwrap();
            assert_eq!(tr.pulled(), &[0, 1, 0, 1, 0, 1, 1, 1, 1, 1]);
            assert_eq!(st.explore_per_arm(), Some(3));
            assert_eq!(st.committed_arm(), Some(1));
            assert!((0..10).all(|t| tr.grad(t) == Some(&[0.0][..])));
        }
    }

    #[test]
    fn ties_commit_to_arm_zero() {
        let y = RewardMatrix::new(2, 6, vec![0.5; 12]).unwrap();
        let mut st = EtcState::new(1.0, 6).unwrap();
        let mut rng = SeedPlan::new(0).stream(0, 0, Purpose::Rollout);
        let tr = rollout(&mut st, &y, &mut rng, false).unwrap();
        assert_eq!(tr.pulled(), &[0, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn fractional_theta_randomizes_exploration_length() {
        let y = RewardMatrix::new(2, 20, vec![0.5; 40]).unwrap();
        let mut st = EtcState::new(2.25, 20).unwrap();
        let mut longer = 0;
        let runs = 4000;
        for seed in 0..runs {
            let mut rng = SeedPlan::new(9).stream(0, seed, Purpose::Rollout);
            let tr = rollout(&mut st, &y, &mut rng, true).unwrap();
            let e = st.explore_per_arm().unwrap();
            assert!(e == 2 || e == 3);
            let expected = if e == 3 { 4.0 } else { -1.0 / 0.75 };
            assert_eq!(tr.grad(0), Some(&[expected][..]));
            longer += usize::from(e == 3);
        }
        let freq = longer as f64 / runs as f64;
        assert!((freq - 0.25).abs() < 0.03, "{freq}");
    }

    #[test]
    fn theta_range_is_enforced() {
        assert!(EtcState::new(0.5, 10).is_err());
        assert!(EtcState::new(5.5, 10).is_err());
        assert!(EtcState::new(5.0, 11).is_ok());
    }
}

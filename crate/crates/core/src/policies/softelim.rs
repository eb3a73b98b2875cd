use super::{sample_index, Differentiable, Policy};
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Largest exponent `S / theta` fed to `exp`; statistics above `EXPONENT_CAP *
/// theta` are capped before the softmax.
pub const EXPONENT_CAP: f64 = 700.0;

/// SoftElim: pulls every arm once, then samples arm `i` with probability
/// proportional to `exp(-S_i / theta)` where
/// `S_i = 2 (max_j mu_j - mu_i)^2 T_i`.
///
/// Arms whose empirical mean trails the leader by a margin that is large
/// relative to their pull count are softly eliminated. The leader always has
/// `S = 0`, so it is pulled with probability at least `1 / K`.
#[derive(Debug, Clone)]
pub struct SoftElimState {
    k: usize,
    theta: f64,
    means: Vec<f64>,
    counts: Vec<u64>,
    rounds: usize,
    s: Vec<f64>,
    probs: Vec<f64>,
}

/// `S_i = 2 (max_j mu_j - mu_i)^2 T_i`. Empirical leaders get exactly 0.
pub fn softelim_statistic(means: &[f64], counts: &[u64]) -> Vec<f64> {
    let mut out = vec![0.0; means.len()];
    statistic_into(means, counts, &mut out);
    out
}

fn statistic_into(means: &[f64], counts: &[u64], out: &mut [f64]) {
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for ((s, &m), &c) in out.iter_mut().zip(means).zip(counts) {
        let gap = max - m;
        *s = 2.0 * gap * gap * c as f64;
    }
}

fn capped(theta: f64, s: f64) -> f64 {
    s.min(EXPONENT_CAP * theta)
}

fn probs_into(theta: f64, s: &[f64], out: &mut [f64]) {
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = capped(theta, min);
    let mut total = 0.0;
    for (p, &si) in out.iter_mut().zip(s) {
        *p = (-(capped(theta, si) - shift) / theta).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

fn grad_from_probs(theta: f64, s: &[f64], probs: &[f64], arm: usize) -> f64 {
    let mean_s: f64 = probs.iter().zip(s).map(|(p, &si)| p * capped(theta, si)).sum();
    (capped(theta, s[arm]) - mean_s) / (theta * theta)
}

/// SoftElim pull probabilities (softmax of `-S / theta`).
pub fn softelim_probs(theta: f64, s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    probs_into(theta, s, &mut out);
    out
}

/// `theta^-2 (S_arm - sum_j p_j S_j)`.
pub fn softelim_grad_log_prob(theta: f64, s: &[f64], arm: usize) -> f64 {
    grad_from_probs(theta, s, &softelim_probs(theta, s), arm)
}

impl SoftElimState {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid(format!("SoftElim theta {theta} must be positive")));
        }
        Ok(Self {
            k,
            theta,
            means: vec![0.0; k],
            counts: vec![0; k],
            rounds: 0,
            s: vec![0.0; k],
            probs: vec![0.0; k],
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Whether the next round is one of the initial round-robin pulls.
    pub fn in_forced_phase(&self) -> bool {
        self.rounds < self.k
    }

    pub fn statistics(&self) -> Vec<f64> {
        softelim_statistic(&self.means, &self.counts)
    }

    fn refresh(&mut self) {
        if self.in_forced_phase() {
            self.probs.fill(0.0);
            self.probs[self.rounds] = 1.0;
        } else {
            statistic_into(&self.means, &self.counts, &mut self.s);
            probs_into(self.theta, &self.s, &mut self.probs);
        }
    }
}

impl Policy for SoftElimState {
    fn num_arms(&self) -> usize {
        self.k
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) {
        self.means.fill(0.0);
        self.counts.fill(0);
        self.rounds = 0;
    }

    fn select(&mut self, _t: usize, rng: &mut Stream, grad: Option<&mut [f64]>) -> usize {
        if self.in_forced_phase() {
            if let Some(g) = grad {
                g[0] = 0.0;
            }
            return self.rounds;
        }
        statistic_into(&self.means, &self.counts, &mut self.s);
        probs_into(self.theta, &self.s, &mut self.probs);
        let arm = sample_index(&self.probs, rng);
        if let Some(g) = grad {
            g[0] = grad_from_probs(self.theta, &self.s, &self.probs, arm);
        }
        arm
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut Stream) {
        self.counts[arm] += 1;
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm] as f64;
        self.rounds += 1;
    }
}

impl Differentiable for SoftElimState {
    fn params(&self) -> Vec<f64> {
        vec![self.theta]
    }

    fn action_probs(&self) -> Vec<f64> {
        let mut st = self.clone();
        st.refresh();
        st.probs
    }

    fn grad_log_prob(&self, arm: usize) -> Vec<f64> {
        if self.in_forced_phase() {
            return vec![0.0];
        }
        let s = self.statistics();
        vec![softelim_grad_log_prob(self.theta, &s, arm)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedPlan};
    use approx::assert_relative_eq;

    #[test]
    fn equal_statistics_are_uniform() {
        assert_eq!(softelim_probs(1.3, &[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softelim_grad_log_prob(1.3, &[0.0, 0.0], 0), 0.0);
        assert_eq!(softelim_grad_log_prob(1.3, &[0.0, 0.0], 1), 0.0);
    }

    #[test]
    fn large_statistic_eliminates() {
        let p = softelim_probs(1.0, &[0.0, 50.0]);
        assert!(p[1] < 1e-20);
        assert_relative_eq!(p[0], 1.0);
        // The statistic is capped at 700 theta, so the weight stays positive.
        let p = softelim_probs(1.0, &[0.0, 1e9]);
        assert!(p[1] > 0.0 && p[1] < 1e-300);
        assert!(softelim_grad_log_prob(1.0, &[0.0, 1e9], 1).is_finite());
    }

    #[test]
    fn sigmoid_case() {
        // S = (0, 2), theta = 2: p_0 = 1 / (1 + e^-1).
        let p = softelim_probs(2.0, &[0.0, 2.0]);
        let sigmoid = 1.0 / (1.0 + (-1.0f64).exp());
        assert_relative_eq!(p[0], sigmoid, epsilon = 1e-15);
        assert_relative_eq!(p[0], 0.731_058_578_630_004_9, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.268_941_421_369_995_1, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_case_gradient() {
        let (theta, s) = (2.0, [0.0, 2.0]);
        let g: Vec<f64> = (0..2).map(|i| softelim_grad_log_prob(theta, &s, i)).collect();
        // theta^-2 (S_i - 2 p_1), frozen from 50-digit evaluation.
        assert_relative_eq!(g[0], -0.134_470_710_684_997_56, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.365_529_289_315_002_44, epsilon = 1e-14);
        let h = 1e-6;
        let log_p = |th: f64, i: usize| softelim_probs(th, &s)[i].ln();
        for (i, gi) in g.iter().enumerate() {
            let fd = (log_p(theta + h, i) - log_p(theta - h, i)) / (2.0 * h);
            assert!(((gi - fd) / fd).abs() < 1e-5);
        }
        let p = softelim_probs(theta, &s);
        assert!((p[0] * g[0] + p[1] * g[1]).abs() < 1e-15);
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(softelim_statistic(&[0.8, 0.8], &[3, 9]), vec![0.0, 0.0]);
        let s = softelim_statistic(&[0.9, 0.5], &[3, 7]);
        assert_eq!(s[0], 0.0);
        assert_relative_eq!(s[1], 2.24, epsilon = 1e-12);
        let doubled = softelim_statistic(&[0.9, 0.5], &[6, 14]);
        assert_relative_eq!(doubled[1], 2.0 * s[1], epsilon = 1e-12);
    }

    #[test]
    fn forced_rounds_are_round_robin_with_zero_gradient() {
        let mut st = SoftElimState::new(3, 1.0).unwrap();
        let mut rng = SeedPlan::new(0).stream(0, 0, Purpose::Rollout);
        for t in 0..3 {
            assert_eq!(st.action_probs()[t], 1.0);
            let mut g = [9.0];
            assert_eq!(st.select(t + 1, &mut rng, Some(&mut g)), t);
            assert_eq!(g, [0.0]);
            st.update(t, 0.5, &mut rng);
        }
        assert!(!st.in_forced_phase());
        assert_eq!(st.counts(), &[1, 1, 1]);
    }

    #[test]
    fn leader_is_pulled_at_least_one_over_k() {
        let mut st = SoftElimState::new(4, 0.05).unwrap();
        let mut rng = SeedPlan::new(1).stream(0, 0, Purpose::Rollout);
        let rewards = [0.3, 0.9, 0.5, 0.1];
        for t in 1..=400 {
            if !st.in_forced_phase() {
                let leader = crate::bandit::argmax(st.means());
                assert!(st.action_probs()[leader] >= 0.25);
            }
            let arm = st.select(t, &mut rng, None);
            let r = if rand::Rng::random::<f64>(&mut rng) < rewards[arm] { 1.0 } else { 0.0 };
            st.update(arm, r, &mut rng);
        }
        assert_eq!(st.rounds(), 400);
        assert_eq!(st.counts().iter().sum::<u64>(), 400);
        assert!(st.means().iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn rejects_non_positive_theta() {
        assert!(SoftElimState::new(2, 0.0).is_err());
        assert!(SoftElimState::new(2, -1.0).is_err());
        assert!(SoftElimState::new(2, f64::NAN).is_err());
    }
}

//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use gradband::policies::{exp3_grad_log_prob, exp3_probs, softelim_grad_log_prob, softelim_probs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `log p_arm` of Exp3, evaluated straight from the definition with a
/// max-shift only inside the log-sum-exp.
pub fn exp3_log_prob(theta: f64, s: &[f64], arm: usize) -> f64 {
    let k = s.len() as f64;
    let x: Vec<f64> = s.iter().map(|v| theta * v / k).collect();
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = x.iter().map(|v| (v - max).exp()).sum();
    (theta / k + (1.0 - theta) * (x[arm] - max).exp() / total).ln()
}

/// `log p_arm` of SoftElim as a log-softmax of `-S / theta`.
pub fn softelim_log_prob(theta: f64, s: &[f64], arm: usize) -> f64 {
    let x: Vec<f64> = s.iter().map(|v| -v / theta).collect();
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x[arm] - lse
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzReport {
    pub cases: usize,
    /// Largest finite-difference disagreement, relative to the largest
    /// gradient magnitude over the arms of the same state.
    pub max_fd_error: f64,
    /// Largest `|sum_i p_i d/dtheta log p_i|`.
    pub max_score_identity: f64,
    pub max_prob_sum_error: f64,
}

impl FuzzReport {
    fn absorb(&mut self, probs: &[f64], grads: &[f64], fd: &[f64]) {
        self.cases += 1;
        let scale = grads.iter().fold(1e-6, |m: f64, g| m.max(g.abs()));
        for (g, d) in grads.iter().zip(fd) {
            self.max_fd_error = self.max_fd_error.max((g - d).abs() / scale);
        }
        let identity: f64 = probs.iter().zip(grads).map(|(p, g)| p * g).sum();
        self.max_score_identity = self.max_score_identity.max(identity.abs());
        self.max_prob_sum_error = self.max_prob_sum_error.max((probs.iter().sum::<f64>() - 1.0).abs());
    }
}

/// Random Exp3 states: `K` in 2..=10, `theta` in [0.05, 0.95], `S_i` in [0, 50].
pub fn fuzz_exp3(cases: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    for _ in 0..cases {
        let k = rng.random_range(2..=10);
        let theta = rng.random_range(0.05..0.95);
        let s: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..50.0)).collect();
        let probs = exp3_probs(theta, &s);
        let grads: Vec<f64> = (0..k).map(|i| exp3_grad_log_prob(theta, &s, i)).collect();
        let fd: Vec<f64> = (0..k)
            .map(|i| central_difference(|t| exp3_log_prob(t, &s, i), theta, 1e-6))
            .collect();
        report.absorb(&probs, &grads, &fd);
    }
    report
}

/// Random SoftElim states: `S` in [0, 10]^10 with one arm at 0 (the leader),
/// `theta` in [0.1, 10].
pub fn fuzz_softelim(cases: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    for _ in 0..cases {
        let mut s: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..10.0)).collect();
        let leader = rng.random_range(0..10);
        s[leader] = 0.0;
        let theta = rng.random_range(0.1..10.0);
        let probs = softelim_probs(theta, &s);
        let grads: Vec<f64> = (0..10).map(|i| softelim_grad_log_prob(theta, &s, i)).collect();
        let h = 1e-6 * theta;
        let fd: Vec<f64> = (0..10)
            .map(|i| central_difference(|t| softelim_log_prob(t, &s, i), theta, h))
            .collect();
        report.absorb(&probs, &grads, &fd);
    }
    report
}

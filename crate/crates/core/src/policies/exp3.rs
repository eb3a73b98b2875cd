use super::{sample_index, Differentiable, Policy};
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Exp3 whose learning rate is tied to the exploration parameter,
/// `eta = theta / K`.
///
/// Pull probabilities mix uniform exploration with exponential weights on the
/// importance-weighted cumulative rewards `S_i`:
/// `p_i = theta / K + (1 - theta) * V_i / V` with `V_i = exp(theta S_i / K)`.
#[derive(Debug, Clone)]
pub struct Exp3State {
    k: usize,
    theta: f64,
    s: Vec<f64>,
    // normalized weights V_i / V and probabilities of the current round
    weights: Vec<f64>,
    probs: Vec<f64>,
}

impl Exp3State {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        Self::with_statistics(theta, vec![0.0; k])
    }

    /// State with given cumulative statistics; mostly useful for inspection.
    pub fn with_statistics(theta: f64, s: Vec<f64>) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(invalid(format!("Exp3 theta {theta} must lie in (0, 1]")));
        }
        if s.is_empty() || s.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Exp3 statistics must be finite and non-empty"));
        }
        let k = s.len();
        let mut st = Self {
            k,
            theta,
            s,
            weights: vec![0.0; k],
            probs: vec![0.0; k],
        };
        st.refresh();
        Ok(st)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eta(&self) -> f64 {
        self.theta / self.k as f64
    }

    pub fn statistics(&self) -> &[f64] {
        &self.s
    }

    fn refresh(&mut self) {
        normalized_weights(self.theta, &self.s, &mut self.weights);
        let kf = self.k as f64;
        for (p, w) in self.probs.iter_mut().zip(&self.weights) {
            *p = self.theta / kf + (1.0 - self.theta) * w;
        }
    }

    fn grad_of(&self, arm: usize) -> f64 {
        grad_from_weights(self.theta, &self.s, &self.weights, self.probs[arm], arm)
    }
}

fn normalized_weights(theta: f64, s: &[f64], out: &mut [f64]) {
    let eta = theta / s.len() as f64;
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (w, &si) in out.iter_mut().zip(s) {
        *w = (eta * (si - max)).exp();
        total += *w;
    }
    for w in out.iter_mut() {
        *w /= total;
    }
}

fn grad_from_weights(theta: f64, s: &[f64], weights: &[f64], p: f64, arm: usize) -> f64 {
    let kf = s.len() as f64;
    let mean_s: f64 = weights.iter().zip(s).map(|(w, si)| w * si / kf).sum();
    (weights[arm] * ((1.0 - theta) * (s[arm] / kf - mean_s) - 1.0) + 1.0 / kf) / p
}

/// Exp3 pull probabilities for statistics `s`.
pub fn exp3_probs(theta: f64, s: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; s.len()];
    normalized_weights(theta, s, &mut w);
    let kf = s.len() as f64;
    w.iter().map(|wi| theta / kf + (1.0 - theta) * wi).collect()
}

/// Derivative of `log p_arm` with respect to `theta` (with `eta = theta / K`).
pub fn exp3_grad_log_prob(theta: f64, s: &[f64], arm: usize) -> f64 {
    let mut w = vec![0.0; s.len()];
    normalized_weights(theta, s, &mut w);
    let p = theta / s.len() as f64 + (1.0 - theta) * w[arm];
    grad_from_weights(theta, s, &w, p, arm)
}

/// Exploration rate with the standard worst-case regret guarantee.
pub fn exp3_theoretical_theta(k: usize, n: usize) -> f64 {
    let kf = k as f64;
    let e = std::f64::consts::E;
    (kf * kf.ln() / ((e - 1.0) * n as f64)).sqrt().min(1.0)
}

impl Policy for Exp3State {
    fn num_arms(&self) -> usize {
        self.k
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) {
        self.s.fill(0.0);
        self.refresh();
    }

    fn select(&mut self, _t: usize, rng: &mut Stream, grad: Option<&mut [f64]>) -> usize {
        let arm = sample_index(&self.probs, rng);
        if let Some(g) = grad {
            g[0] = self.grad_of(arm);
        }
        arm
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut Stream) {
        self.s[arm] += reward / self.probs[arm];
        self.refresh();
    }
}

impl Differentiable for Exp3State {
    fn params(&self) -> Vec<f64> {
        vec![self.theta]
    }

    fn action_probs(&self) -> Vec<f64> {
        self.probs.clone()
    }

    fn grad_log_prob(&self, arm: usize) -> Vec<f64> {
        vec![self.grad_of(arm)]
    }
}

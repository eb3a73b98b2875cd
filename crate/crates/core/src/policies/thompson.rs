use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::Policy;
use crate::rng::Stream;

/// Draws one posterior sample per arm and returns the arg-max.
pub fn ts_bernoulli_action(successes: &[f64], failures: &[f64], rng: &mut Stream) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, (&s, &f)) in successes.iter().zip(failures).enumerate() {
        let v = Beta::new(1.0 + s, 1.0 + f)
            .expect("posterior parameters are positive")
            .sample(rng);
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Randomized rounding of a `[0, 1]` reward to a Bernoulli outcome.
pub fn bernoulli_round(reward: f64, rng: &mut Stream) -> bool {
    rng.random::<f64>() < reward
}

/// Bernoulli Thompson sampling with a `Beta(1, 1)` prior. Rewards in `[0, 1]`
/// are rounded to `Ber(reward)` before the posterior update.
#[derive(Debug, Clone)]
pub struct ThompsonState {
    successes: Vec<f64>,
    failures: Vec<f64>,
}

impl ThompsonState {
    pub fn new(k: usize) -> Self {
        Self {
            successes: vec![0.0; k],
            failures: vec![0.0; k],
        }
    }

    pub fn successes(&self) -> &[f64] {
        &self.successes
    }

    pub fn failures(&self) -> &[f64] {
        &self.failures
    }
}

impl Policy for ThompsonState {
    fn num_arms(&self) -> usize {
        self.successes.len()
    }

    fn reset(&mut self) {
        self.successes.fill(0.0);
        self.failures.fill(0.0);
    }

    fn select(&mut self, _t: usize, rng: &mut Stream, _grad: Option<&mut [f64]>) -> usize {
        ts_bernoulli_action(&self.successes, &self.failures, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, rng: &mut Stream) {
        if bernoulli_round(reward, rng) {
            self.successes[arm] += 1.0;
        } else {
            self.failures[arm] += 1.0;
        }
    }
}

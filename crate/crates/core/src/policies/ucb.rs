//! Index policies. UCB1 uses the bonus `sqrt(2 ln t / T_i)`. UCB-V uses
//! `sqrt(2 V_i e_t / T_i) + 3 e_t / T_i` for rewards in `[0, 1]` with
//! exploration function `e_t = zeta ln t`; `zeta = 1` is the plain form and
//! the default [`UCBV_ZETA`] reproduces published benchmark regrets. Here `t`
//! is the number of pulls made so far.

use super::Policy;
use crate::rng::Stream;

/// Default UCB-V exploration scale.
pub const UCBV_ZETA: f64 = 2.1;

fn argmax_by_index(k: usize, index: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_value = index(0);
    for i in 1..k {
        let v = index(i);
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// UCB1 choice once every arm has been pulled.
pub fn ucb1_action(means: &[f64], counts: &[u64], t: u64) -> usize {
    let log_t = (t as f64).ln();
    argmax_by_index(means.len(), |i| {
        means[i] + (2.0 * log_t / counts[i] as f64).sqrt()
    })
}

/// UCB-V choice once every arm has been pulled; `variances` are the biased
/// empirical variances of the observed rewards.
pub fn ucbv_action(means: &[f64], counts: &[u64], variances: &[f64], t: u64) -> usize {
    ucbv_action_scaled(means, counts, variances, t, 1.0)
}

/// UCB-V choice with exploration function `zeta ln t`.
pub fn ucbv_action_scaled(means: &[f64], counts: &[u64], variances: &[f64], t: u64, zeta: f64) -> usize {
    let log_t = zeta * (t as f64).ln();
    argmax_by_index(means.len(), |i| {
        let c = counts[i] as f64;
        means[i] + (2.0 * variances[i] * log_t / c).sqrt() + 3.0 * log_t / c
    })
}

#[derive(Debug, Clone)]
struct RunningStats {
    means: Vec<f64>,
    m2: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl RunningStats {
    fn new(k: usize) -> Self {
        Self {
            means: vec![0.0; k],
            m2: vec![0.0; k],
            counts: vec![0; k],
            total: 0,
        }
    }

    fn reset(&mut self) {
        self.means.fill(0.0);
        self.m2.fill(0.0);
        self.counts.fill(0);
        self.total = 0;
    }

    fn unpulled(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }

    fn push(&mut self, arm: usize, x: f64) {
        self.counts[arm] += 1;
        self.total += 1;
        let delta = x - self.means[arm];
        self.means[arm] += delta / self.counts[arm] as f64;
        self.m2[arm] += delta * (x - self.means[arm]);
    }

    fn variances(&self) -> Vec<f64> {
        self.m2
            .iter()
            .zip(&self.counts)
            .map(|(m2, &c)| (m2 / c as f64).max(0.0))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ucb1State {
    stats: RunningStats,
}

impl Ucb1State {
    pub fn new(k: usize) -> Self {
        Self {
            stats: RunningStats::new(k),
        }
    }
}

impl Policy for Ucb1State {
    fn num_arms(&self) -> usize {
        self.stats.means.len()
    }

    fn reset(&mut self) {
        self.stats.reset();
    }

    fn select(&mut self, _t: usize, _rng: &mut Stream, _grad: Option<&mut [f64]>) -> usize {
        self.stats
            .unpulled()
            .unwrap_or_else(|| ucb1_action(&self.stats.means, &self.stats.counts, self.stats.total))
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut Stream) {
        self.stats.push(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct UcbVState {
    stats: RunningStats,
    zeta: f64,
}

impl UcbVState {
    pub fn new(k: usize) -> Self {
        Self::with_zeta(k, UCBV_ZETA)
    }

    pub fn with_zeta(k: usize, zeta: f64) -> Self {
        Self {
            stats: RunningStats::new(k),
            zeta,
        }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

impl Policy for UcbVState {
    fn num_arms(&self) -> usize {
        self.stats.means.len()
    }

    fn reset(&mut self) {
        self.stats.reset();
    }

    fn select(&mut self, _t: usize, _rng: &mut Stream, _grad: Option<&mut [f64]>) -> usize {
        self.stats.unpulled().unwrap_or_else(|| {
            let v = self.stats.variances();
            ucbv_action_scaled(&self.stats.means, &self.stats.counts, &v, self.stats.total, self.zeta)
        })
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut Stream) {
        self.stats.push(arm, reward);
    }
}

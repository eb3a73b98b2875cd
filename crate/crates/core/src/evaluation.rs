//! Bayes regret estimation, parameter sweeps, benchmark tables and the
//! SoftElim regret-bound check.
//!
//! Regret is realized regret: per sample, the reward the best arm of the
//! instance actually produced minus the reward the policy collected, both on
//! the same reward matrix.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::bandit::{rollout, InstanceSpec};
use crate::error::{invalid, Error, Result};
use crate::optimizer::GaussianComponent;
use crate::policies::PolicySpec;
use crate::priors::{sample_rewards, PriorSpec};
use crate::rng::{Purpose, SeedPlan, Stream};

/// Default number of evaluation draws.
pub const DEFAULT_N_EVAL: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub mean_regret: f64,
    /// Sample standard deviation of the per-draw regret over `sqrt(n_eval)`.
    pub stderr: f64,
    pub n_eval: usize,
    /// Mean reward collected by the policy.
    pub mean_reward: f64,
    pub reward_stderr: f64,
    /// Mean reward of the best arm of each instance.
    pub mean_best_reward: f64,
    pub per_sample: Option<Vec<f64>>,
}

/// Mean and standard error of `xs`, summed in order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

struct Draw {
    reward: f64,
    best: f64,
}

fn evaluate<F>(
    policy: &PolicySpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
    keep_samples: bool,
    instance_of: F,
) -> Result<RegretReport>
where
    F: Fn(&mut Stream) -> InstanceSpec + Sync,
{
    if n_eval < 2 {
        return Err(invalid("n_eval must be at least 2"));
    }
    let draws: Vec<Draw> = (0..n_eval as u64)
        .into_par_iter()
        .map(|j| {
            let instance = instance_of(&mut plan.stream(0, j, Purpose::Instance));
            let y = sample_rewards(&instance, n, &mut plan.stream(0, j, Purpose::Rewards))?;
            let mut state = policy.build(y.k(), n, Some(&instance))?;
            let trace = rollout(&mut state, &y, &mut plan.stream(0, j, Purpose::Rollout), false)?;
            Ok(Draw {
                reward: trace.total_reward(),
                best: y.row(instance.best_arm()).iter().sum(),
            })
        })
        .collect::<Result<_>>()?;
    let regrets: Vec<f64> = draws.iter().map(|d| d.best - d.reward).collect();
    let rewards: Vec<f64> = draws.iter().map(|d| d.reward).collect();
    let (mean_regret, stderr) = mean_stderr(&regrets);
    let (mean_reward, reward_stderr) = mean_stderr(&rewards);
    let mean_best_reward = draws.iter().map(|d| d.best).sum::<f64>() / n_eval as f64;
    Ok(RegretReport {
        mean_regret,
        stderr,
        n_eval,
        mean_reward,
        reward_stderr,
        mean_best_reward,
        per_sample: keep_samples.then_some(regrets),
    })
}

/// Bayes regret of `policy` over `n_eval` draws from `prior`.
///
/// Draw `j` always uses the same instance and rewards for a given plan, so
/// different policies and parameters are compared on common random numbers.
pub fn bayes_regret(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<RegretReport> {
    prior.validate()?;
    evaluate(policy, n, n_eval, plan, false, |rng| prior.sample_instance(rng))
}

/// Like [`bayes_regret`], keeping the per-draw regrets.
pub fn bayes_regret_samples(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<RegretReport> {
    prior.validate()?;
    evaluate(policy, n, n_eval, plan, true, |rng| prior.sample_instance(rng))
}

/// Expected regret on one fixed instance.
pub fn instance_regret(
    policy: &PolicySpec,
    instance: &InstanceSpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<RegretReport> {
    evaluate(policy, n, n_eval, plan, false, |_| instance.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub regret: f64,
    pub stderr: f64,
}

/// Bayes regret of the parameterized `policy` family at each grid point, on
/// common random numbers.
pub fn regret_sweep(
    policy: &PolicySpec,
    theta_grid: &[f64],
    prior: &PriorSpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<Vec<SweepRow>> {
    if theta_grid.is_empty() {
        return Err(Error::Empty("theta grid"));
    }
    theta_grid
        .iter()
        .map(|&theta| {
            let r = bayes_regret(&policy.with_params(&[theta])?, prior, n, n_eval, plan)?;
            Ok(SweepRow {
                theta,
                regret: r.mean_regret,
                stderr: r.stderr,
            })
        })
        .collect()
}

/// Sign changes of the first differences of `values` after a centered
/// three-point moving average (end points averaged over two). A unimodal
/// curve has at most one.
pub fn smoothed_sign_changes(values: &[f64]) -> usize {
    let len = values.len();
    let smooth: Vec<f64> = (0..len)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(len - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let signs: Vec<f64> = smooth
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Right-hand side of the SoftElim (`theta = 8`) regret bound
/// `sum_i (2e + 1)(16 ln(n) / gap_i + gap_i) + 5 gap_i`, where arms with zero
/// gap contribute nothing.
pub fn softelim_regret_bound(means: &[f64], n: usize) -> f64 {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = 2.0 * std::f64::consts::E + 1.0;
    let log_n = (n as f64).ln();
    means
        .iter()
        .map(|m| best - m)
        .filter(|&gap| gap > 0.0)
        .map(|gap| c * (16.0 * log_n / gap + gap) + 5.0 * gap)
        .sum()
}

/// Parameter at which the SoftElim regret bound holds.
pub const SOFTELIM_BOUND_THETA: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub regret: RegretReport,
    pub bound: f64,
    pub pass: bool,
}

/// Runs SoftElim(8) on a fixed instance and compares its regret to the bound.
pub fn softelim_bound_check(
    instance: &InstanceSpec,
    n: usize,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<BoundCheck> {
    if !instance.has_unique_best() {
        return Err(Error::NonUniqueBestArm);
    }
    let policy = PolicySpec::SoftElim {
        theta: SOFTELIM_BOUND_THETA,
    };
    let regret = instance_regret(&policy, instance, n, n_eval, plan)?;
    let bound = softelim_regret_bound(instance.means(), n);
    Ok(BoundCheck {
        pass: regret.mean_regret <= bound,
        regret,
        bound,
    })
}

/// Monte Carlo estimate of the Bayes reward of randomized explore-then-commit
/// under a Gaussian mixture, stratified by component.
///
/// Component `c` is simulated with `n_eval` rollouts on `plan.fork("component-c")`;
/// the estimate and its standard error combine the per-component results with
/// the normalized weights.
pub fn etc_mixture_mc_reward(
    mixture: &[GaussianComponent],
    n: usize,
    theta: f64,
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<(f64, f64)> {
    let total: f64 = mixture.iter().map(|c| c.weight).sum();
    if mixture.is_empty() || !(total > 0.0) || mixture.iter().any(|c| c.weight < 0.0) {
        return Err(invalid("mixture needs non-negative weights with a positive sum"));
    }
    let policy = PolicySpec::Etc { theta };
    let (mut mean, mut var) = (0.0, 0.0);
    for (i, c) in mixture.iter().enumerate() {
        let prior = PriorSpec::GaussianPair { mu1: c.mu1, mu2: c.mu2 };
        let r = bayes_regret(&policy, &prior, n, n_eval, &plan.fork(&format!("component-{i}")))?;
        let w = c.weight / total;
        mean += w * r.mean_reward;
        var += w * w * r.reward_stderr * r.reward_stderr;
    }
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub policy: String,
    pub prior: String,
    pub n: usize,
    pub regret: f64,
    pub stderr: f64,
    pub n_eval: usize,
    pub seed: u64,
}

/// Regret of every policy in `policies` on common random numbers.
pub fn benchmark_table(
    prior: &PriorSpec,
    n: usize,
    policies: &[PolicySpec],
    n_eval: usize,
    plan: &SeedPlan,
) -> Result<Vec<BenchRow>> {
    policies
        .iter()
        .map(|p| {
            let r = bayes_regret(p, prior, n, n_eval, plan)?;
            Ok(BenchRow {
                policy: p.name().to_string(),
                prior: prior.name().to_string(),
                n,
                regret: r.mean_regret,
                stderr: r.stderr,
                n_eval,
                seed: plan.master_seed(),
            })
        })
        .collect()
}

/// Fixed-width text rendering of a benchmark table.
pub fn render_table(rows: &[BenchRow]) -> String {
    let width = rows.iter().map(|r| r.policy.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>10}  {:>8}\n", "policy", "regret", "stderr");
    for r in rows {
        let _ = writeln!(out, "{:<width$}  {:>10.3}  {:>8.3}", r.policy, r.regret, r.stderr);
    }
    out
}

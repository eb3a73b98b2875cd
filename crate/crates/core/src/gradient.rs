//! Score-function estimates of the Bayes reward gradient.
//!
//! For one rollout with per-round score gradients `g_t` and realized rewards,
//! the estimate is `sum_t g_t (G_t - b_t)` where `G_t` is the reward collected
//! from round `t` onward and `b_t` a baseline that does not depend on the
//! actions from round `t` on. Three baselines are available: none, the suffix
//! reward of the best arm of the instance, and the suffix reward of an
//! independent rollout of the same policy on the same reward matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{rollout, InstanceSpec, RewardMatrix, RolloutTrace};
use crate::error::{invalid, Error, Result};
use crate::policies::PolicySpec;
use crate::priors::{sample_rewards, PriorSpec};
use crate::rng::{Purpose, SeedPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "none")]
    None,
    /// Suffix reward of the best arm in hindsight of the instance.
    #[serde(rename = "opt")]
    Opt,
    /// Suffix reward of an independent rollout on the same rewards.
    #[serde(rename = "self")]
    SelfRun,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::None, BaselineKind::Opt, BaselineKind::SelfRun];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::None => "none",
            BaselineKind::Opt => "opt",
            BaselineKind::SelfRun => "self",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// Extra input a baseline needs besides the trace and the reward matrix.
#[derive(Debug, Clone, Copy)]
pub enum BaselineInput<'a> {
    None,
    Instance(&'a InstanceSpec),
    Trace(&'a RolloutTrace),
}

/// `out[t] = xs[t] + xs[t + 1] + ...`, computed in one backward pass.
pub fn suffix_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    let mut acc = 0.0;
    for (o, x) in out.iter_mut().zip(xs).rev() {
        acc += x;
        *o = acc;
    }
    out
}

fn baseline_returns(
    y: &RewardMatrix,
    baseline: BaselineKind,
    aux: BaselineInput<'_>,
) -> Result<Option<Vec<f64>>> {
    Ok(match (baseline, aux) {
        (BaselineKind::None, _) => None,
        (BaselineKind::Opt, BaselineInput::Instance(inst)) => {
            if inst.num_arms() != y.k() {
                return Err(Error::DimensionMismatch {
                    what: "instance arms vs reward matrix rows",
                    expected: y.k(),
                    actual: inst.num_arms(),
                });
            }
            Some(suffix_sums(y.row(inst.best_arm())))
        }
        (BaselineKind::SelfRun, BaselineInput::Trace(other)) => {
            if other.len() != y.n() {
                return Err(Error::DimensionMismatch {
                    what: "baseline trace length",
                    expected: y.n(),
                    actual: other.len(),
                });
            }
            Some(suffix_sums(other.rewards()))
        }
        (BaselineKind::Opt, _) => return Err(Error::MissingBaselineInput("opt")),
        (BaselineKind::SelfRun, _) => return Err(Error::MissingBaselineInput("self")),
    })
}

fn weighted_score(trace: &RolloutTrace, returns: &[f64], baseline: Option<&[f64]>) -> Vec<f64> {
    let dim = trace.param_dim();
    let mut out = vec![0.0; dim];
    for (t, &g_t) in returns.iter().enumerate() {
        let advantage = g_t - baseline.map_or(0.0, |b| b[t]);
        let grad = trace.grad(t).expect("trace has gradients");
        for (o, g) in out.iter_mut().zip(grad) {
            *o += g * advantage;
        }
    }
    out
}

/// Gradient estimate of a single rollout.
pub fn sample_gradient(
    trace: &RolloutTrace,
    y: &RewardMatrix,
    baseline: BaselineKind,
    aux: BaselineInput<'_>,
) -> Result<Vec<f64>> {
    if !trace.has_grads() {
        return Err(Error::GradientsNotRecorded);
    }
    if trace.len() != y.n() {
        return Err(Error::DimensionMismatch {
            what: "trace length vs horizon",
            expected: y.n(),
            actual: trace.len(),
        });
    }
    let b = baseline_returns(y, baseline, aux)?;
    Ok(weighted_score(trace, &suffix_sums(trace.rewards()), b.as_deref()))
}

/// Batch gradient `(1/m) sum_j g_j` with per-coordinate diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradEstimate {
    pub mean_grad: Vec<f64>,
    /// Unbiased per-coordinate variance of the per-sample gradients (0 when
    /// `m = 1`).
    pub sample_variance: Vec<f64>,
    pub per_sample: Option<Vec<Vec<f64>>>,
    pub m: usize,
}

impl GradEstimate {
    /// Summarizes per-sample gradients, summing in index order.
    pub fn from_samples(samples: Vec<Vec<f64>>, keep_samples: bool) -> Result<Self> {
        let m = samples.len();
        let dim = samples.first().ok_or(Error::Empty("gradient batch"))?.len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "per-sample gradient",
                expected: dim,
                actual: bad.len(),
            });
        }
        let mut mean = vec![0.0; dim];
        for s in &samples {
            for (acc, v) in mean.iter_mut().zip(s) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut var = vec![0.0; dim];
        if m > 1 {
            for s in &samples {
                for ((acc, v), mu) in var.iter_mut().zip(s).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
            var.iter_mut().for_each(|v| *v /= (m - 1) as f64);
        }
        Ok(Self {
            mean_grad: mean,
            sample_variance: var,
            per_sample: keep_samples.then_some(samples),
            m,
        })
    }

    pub fn norm(&self) -> f64 {
        self.mean_grad.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Per-coordinate standard error of the mean gradient.
    pub fn standard_error(&self) -> Vec<f64> {
        self.sample_variance
            .iter()
            .map(|v| (v / self.m as f64).sqrt())
            .collect()
    }
}

/// Per-sample gradients of one prior draw under each of `baselines`, all
/// sharing the same instance, reward matrix and rollout.
pub fn draw_sample_gradients(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    plan: &SeedPlan,
    iteration: u64,
    sample: u64,
    baselines: &[BaselineKind],
) -> Result<Vec<Vec<f64>>> {
    let instance = prior.sample_instance(&mut plan.stream(iteration, sample, Purpose::Instance));
    let y = sample_rewards(&instance, n, &mut plan.stream(iteration, sample, Purpose::Rewards))?;
    let mut state = policy.build(y.k(), n, Some(&instance))?;
    let trace = rollout(
        &mut state,
        &y,
        &mut plan.stream(iteration, sample, Purpose::Rollout),
        true,
    )?;
    let self_trace = if baselines.contains(&BaselineKind::SelfRun) {
        Some(rollout(
            &mut state,
            &y,
            &mut plan.stream(iteration, sample, Purpose::Baseline),
            false,
        )?)
    } else {
        None
    };
    let returns = suffix_sums(trace.rewards());
    baselines
        .iter()
        .map(|&b| {
            let aux = match b {
                BaselineKind::None => BaselineInput::None,
                BaselineKind::Opt => BaselineInput::Instance(&instance),
                BaselineKind::SelfRun => BaselineInput::Trace(self_trace.as_ref().expect("self rollout")),
            };
            let base = baseline_returns(&y, b, aux)?;
            Ok(weighted_score(&trace, &returns, base.as_deref()))
        })
        .collect()
}

/// Batch estimates at the parameters of `policy`, one per baseline, from a
/// shared set of `m` prior draws and rollouts.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradients(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    m: usize,
    baselines: &[BaselineKind],
    plan: &SeedPlan,
    iteration: u64,
    keep_samples: bool,
) -> Result<Vec<GradEstimate>> {
    if m == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    if baselines.is_empty() {
        return Err(Error::Empty("baseline list"));
    }
    if !policy.is_differentiable() {
        return Err(invalid(format!("policy `{}` has no parameters to differentiate", policy.name())));
    }
    prior.validate()?;
    let per_sample: Vec<Vec<Vec<f64>>> = (0..m as u64)
        .into_par_iter()
        .map(|j| draw_sample_gradients(policy, prior, n, plan, iteration, j, baselines))
        .collect::<Result<_>>()?;
    let mut by_baseline: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(m); baselines.len()];
    for sample in per_sample {
        for (dst, g) in by_baseline.iter_mut().zip(sample) {
            dst.push(g);
        }
    }
    by_baseline
        .into_iter()
        .map(|s| GradEstimate::from_samples(s, keep_samples))
        .collect()
}

/// Batch estimate of the Bayes reward gradient at the parameters of `policy`.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradient(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    m: usize,
    baseline: BaselineKind,
    plan: &SeedPlan,
    iteration: u64,
    keep_samples: bool,
) -> Result<GradEstimate> {
    let mut v = batch_gradients(policy, prior, n, m, &[baseline], plan, iteration, keep_samples)?;
    Ok(v.remove(0))
}

/// One row of a gradient variance profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub theta: f64,
    pub baseline: BaselineKind,
    pub mean_grad: f64,
    pub var_grad: f64,
    pub m: usize,
}

/// Mean and per-sample variance of the gradient over a parameter grid. The
/// same draws are reused at every grid point and for every baseline.
pub fn gradient_variance_profile(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    theta_grid: &[f64],
    m: usize,
    baselines: &[BaselineKind],
    plan: &SeedPlan,
) -> Result<Vec<VarianceRow>> {
    if theta_grid.is_empty() {
        return Err(Error::Empty("theta grid"));
    }
    let mut rows = Vec::with_capacity(theta_grid.len() * baselines.len());
    for &theta in theta_grid {
        let spec = policy.with_params(&[theta])?;
        let est = batch_gradients(&spec, prior, n, m, baselines, plan, 0, false)?;
        for (&baseline, e) in baselines.iter().zip(est) {
            rows.push(VarianceRow {
                theta,
                baseline,
                mean_grad: e.mean_grad[0],
                var_grad: e.sample_variance[0],
                m,
            });
        }
    }
    Ok(rows)
}

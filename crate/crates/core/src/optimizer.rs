//! GradBand: projected stochastic gradient ascent on the Bayes reward.
//!
//! The step size is `alpha = 1 / (c sqrt(L))` where `c` bounds the norm of
//! the batch gradient at the initial parameters with high probability. `c` is
//! calibrated as the largest norm among 20 independent batch estimates (a
//! fresh estimate exceeds it with probability 1/21), optionally inflated by a
//! safety factor.
//!
//! Training batches, calibration batches and evaluation draws come from
//! separate forks of the seed plan, so evaluation never reuses training data.

use serde::Serialize;
use libm::erfc;

use crate::error::{invalid, Error, Result};
use crate::evaluation::bayes_regret;
use crate::gradient::{batch_gradient, BaselineKind};
use crate::policies::{Bounds, PolicySpec};
use crate::priors::PriorSpec;
use crate::rng::SeedPlan;

pub const DEFAULT_CALIBRATION_BATCHES: usize = 20;
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.0;

/// Held-out evaluation during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSettings {
    pub n_eval: usize,
    /// Evaluate after every `every` iterations (and after the last one).
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradBandConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub baseline: BaselineKind,
    pub theta0: Vec<f64>,
    /// Feasible box; `None` uses the default box of the policy family.
    pub bounds: Option<Bounds>,
    pub calibration_batches: usize,
    /// Multiplier on the largest calibration norm.
    pub safety_factor: f64,
    pub eval: Option<EvalSettings>,
    /// Clip every batch gradient to norm `clip * c` before stepping, so a
    /// single step never moves further than `clip / sqrt(L)`. Off by default.
    pub clip: Option<f64>,
    /// Return the mean of the last `average_tail` iterates instead of the
    /// last one. 0 (the default) keeps the last iterate.
    pub average_tail: usize,
}

impl GradBandConfig {
    pub fn new(iterations: usize, batch_size: usize, baseline: BaselineKind, theta0: Vec<f64>) -> Self {
        Self {
            iterations,
            batch_size,
            baseline,
            theta0,
            bounds: None,
            calibration_batches: DEFAULT_CALIBRATION_BATCHES,
            safety_factor: DEFAULT_SAFETY_FACTOR,
            eval: None,
            clip: None,
            average_tail: 0,
        }
    }

    fn resolved_bounds(&self, policy: &PolicySpec, n: usize) -> Result<Bounds> {
        match &self.bounds {
            Some(b) => Ok(b.clone()),
            None => policy
                .bounds(n)
                .ok_or_else(|| invalid(format!("policy `{}` has no tunable parameters", policy.name()))),
        }
    }

    pub fn validate(&self, policy: &PolicySpec, n: usize) -> Result<Bounds> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.calibration_batches == 0 {
            return Err(invalid("calibration needs at least one batch"));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor.is_finite()) {
            return Err(invalid("safety factor must be positive"));
        }
        if let Some(clip) = self.clip {
            if !(clip > 0.0 && clip.is_finite()) {
                return Err(invalid("clip multiplier must be positive"));
            }
        }
        if self.average_tail > self.iterations {
            return Err(invalid("average_tail cannot exceed the number of iterations"));
        }
        if let Some(e) = self.eval {
            if e.n_eval < 2 || e.every == 0 {
                return Err(invalid("evaluation needs n_eval >= 2 and every >= 1"));
            }
        }
        let bounds = self.resolved_bounds(policy, n)?;
        if !bounds.contains(&self.theta0) {
            return Err(invalid(format!(
                "initial parameters {:?} lie outside [{:?}, {:?}]",
                self.theta0, bounds.lower, bounds.upper
            )));
        }
        Ok(bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub c: f64,
    pub norms: Vec<f64>,
    /// Set when every calibration gradient was zero and `c = 1` was used.
    pub fallback: bool,
}

/// `c` from a set of batch-gradient norms: `safety_factor` times the largest,
/// or 1 when all are zero.
pub fn step_scale(norms: &[f64], safety_factor: f64) -> Calibration {
    let max = norms.iter().copied().fold(0.0, f64::max);
    let fallback = !(max > 0.0 && max.is_finite());
    Calibration {
        c: if fallback { 1.0 } else { safety_factor * max },
        norms: norms.to_vec(),
        fallback,
    }
}

/// Calibrates `c` from `batches` independent batch gradients at `theta0`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_step_size(
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    m: usize,
    baseline: BaselineKind,
    theta0: &[f64],
    batches: usize,
    safety_factor: f64,
    plan: &SeedPlan,
) -> Result<Calibration> {
    let spec = policy.with_params(theta0)?;
    let plan = plan.fork("calibrate");
    let norms = (0..batches as u64)
        .map(|b| Ok(batch_gradient(&spec, prior, n, m, baseline, &plan, b, false)?.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(step_scale(&norms, safety_factor))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPoint {
    pub regret: f64,
    pub stderr: f64,
}

/// Telemetry of iteration `iteration` (1-based): the gradient was estimated
/// at the previous parameters and `theta` holds the parameters after the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub alpha: f64,
    pub hit_lower: bool,
    pub hit_upper: bool,
    pub eval: Option<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationRun {
    pub policy: PolicySpec,
    pub theta0: Vec<f64>,
    /// Evaluation of `theta0`, when evaluation is enabled.
    pub initial_eval: Option<EvalPoint>,
    pub records: Vec<IterationRecord>,
    /// Last iterate, or the tail average when requested.
    pub final_theta: Vec<f64>,
    /// Evaluation of `final_theta`, when evaluation is enabled.
    pub final_eval: Option<EvalPoint>,
    pub calibration: Calibration,
    pub alpha: f64,
}

impl OptimizationRun {
    pub fn final_policy(&self) -> PolicySpec {
        self.policy
            .with_params(&self.final_theta)
            .expect("parameters keep their dimension")
    }

    pub fn final_eval(&self) -> Option<&EvalPoint> {
        self.final_eval.as_ref()
    }
}

fn eval_point(policy: &PolicySpec, prior: &PriorSpec, n: usize, n_eval: usize, plan: &SeedPlan) -> Result<EvalPoint> {
    let r = bayes_regret(policy, prior, n, n_eval, plan)?;
    Ok(EvalPoint {
        regret: r.mean_regret,
        stderr: r.stderr,
    })
}

/// Runs `config.iterations` projected ascent steps from `config.theta0`.
pub fn gradband(
    config: &GradBandConfig,
    policy: &PolicySpec,
    prior: &PriorSpec,
    n: usize,
    plan: &SeedPlan,
) -> Result<OptimizationRun> {
    let bounds = config.validate(policy, n)?;
    prior.validate()?;
    let calibration = calibrate_step_size(
        policy,
        prior,
        n,
        config.batch_size,
        config.baseline,
        &config.theta0,
        config.calibration_batches,
        config.safety_factor,
        plan,
    )?;
    let alpha = 1.0 / (calibration.c * (config.iterations as f64).sqrt());
    let train = plan.fork("train");
    let eval_plan = plan.fork("eval");

    let initial_eval = match config.eval {
        Some(e) => Some(eval_point(&policy.with_params(&config.theta0)?, prior, n, e.n_eval, &eval_plan)?),
        None => None,
    };
    let mut theta = config.theta0.clone();
    let mut records = Vec::with_capacity(config.iterations);
    for it in 1..=config.iterations {
        let spec = policy.with_params(&theta)?;
        let est = batch_gradient(&spec, prior, n, config.batch_size, config.baseline, &train, it as u64, false)?;
        if est.mean_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                iteration: it,
                theta,
                gradient: est.mean_grad,
            });
        }
        let norm = est.norm();
        let scale = match config.clip {
            Some(clip) if norm > clip * calibration.c => clip * calibration.c / norm,
            _ => 1.0,
        };
        for (x, g) in theta.iter_mut().zip(&est.mean_grad) {
            *x += alpha * scale * g;
        }
        let (hit_lower, hit_upper) = bounds.project(&mut theta);
        let eval = match config.eval {
            Some(e) if it % e.every == 0 || it == config.iterations => Some(eval_point(
                &policy.with_params(&theta)?,
                prior,
                n,
                e.n_eval,
                &eval_plan,
            )?),
            _ => None,
        };
        records.push(IterationRecord {
            iteration: it,
            theta: theta.clone(),
            grad_norm: norm,
            grad: est.mean_grad,
            alpha,
            hit_lower,
            hit_upper,
            eval,
        });
    }
    let (final_theta, final_eval) = if config.average_tail > 0 {
        let tail = &records[records.len() - config.average_tail..];
        let mut mean = vec![0.0; theta.len()];
        for r in tail {
            for (m, x) in mean.iter_mut().zip(&r.theta) {
                *m += x / tail.len() as f64;
            }
        }
        // The box is convex; projecting only guards against rounding.
        bounds.project(&mut mean);
        let eval = match config.eval {
            Some(e) => Some(eval_point(&policy.with_params(&mean)?, prior, n, e.n_eval, &eval_plan)?),
            None => None,
        };
        (mean, eval)
    } else {
        (theta, records.last().and_then(|r| r.eval.clone()))
    };
    Ok(OptimizationRun {
        policy: policy.clone(),
        theta0: config.theta0.clone(),
        initial_eval,
        records,
        final_theta,
        final_eval,
        calibration,
        alpha,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn etc_reward_at_integer(mu1: f64, gap: f64, n: f64, theta: f64) -> f64 {
    mu1 * n - gap * (theta + normal_cdf(-gap * (theta / 2.0).sqrt()) * (n - 2.0 * theta))
}

/// Expected reward of randomized explore-then-commit with unit-variance
/// Gaussian rewards of means `mu1` and `mu2` over horizon `n`.
///
/// For integer `theta` the exploration phase costs `gap * theta` and the
/// commit phase picks the worse arm with probability `Phi(-gap sqrt(theta/2))`.
/// Fractional `theta` interpolates linearly between the neighboring integers.
pub fn etc_closed_form_reward(mu1: f64, mu2: f64, n: usize, theta: f64) -> Result<f64> {
    let upper = (n / 2) as f64;
    if !(theta >= 1.0 && theta <= upper) {
        return Err(invalid(format!("theta {theta} must lie in [1, {upper}]")));
    }
    let (hi, lo) = if mu1 >= mu2 { (mu1, mu2) } else { (mu2, mu1) };
    let gap = hi - lo;
    let nf = n as f64;
    let floor = theta.floor();
    let frac = theta - floor;
    let r_floor = etc_reward_at_integer(hi, gap, nf, floor);
    if frac == 0.0 {
        return Ok(r_floor);
    }
    let r_ceil = etc_reward_at_integer(hi, gap, nf, floor + 1.0);
    Ok((1.0 - frac) * r_floor + frac * r_ceil)
}

/// One component of a finite mixture of two-arm Gaussian instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mu1: f64,
    pub mu2: f64,
}

/// Bayes reward of randomized explore-then-commit under a mixture prior.
/// Weights are normalized.
pub fn mixture_etc_reward(mixture: &[GaussianComponent], n: usize, theta: f64) -> Result<f64> {
    let total: f64 = mixture.iter().map(|c| c.weight).sum();
    if mixture.is_empty() || !(total > 0.0) || mixture.iter().any(|c| c.weight < 0.0) {
        return Err(invalid("mixture needs non-negative weights with a positive sum"));
    }
    mixture.iter().try_fold(0.0, |acc, c| {
        Ok(acc + c.weight / total * etc_closed_form_reward(c.mu1, c.mu2, n, theta)?)
    })
}

/// `v[i - 1] - 2 v[i] + v[i + 1]` for each interior point.
pub fn second_differences(values: &[f64]) -> Vec<f64> {
    values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gradband::evaluation::{benchmark_table, etc_mixture_mc_reward, regret_sweep, render_table};
use gradband::gradient::gradient_variance_profile;
use gradband::optimizer::{mixture_etc_reward, second_differences, EvalSettings};
use gradband::{gradband, GradBandConfig, SeedPlan};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Concavity tolerance on second differences of the closed-form reward.
pub const CONCAVITY_TOL: f64 = 1e-9;

/// Resolved run context shared by every subcommand.
pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let seed = seed.unwrap_or_else(|| config.seed());
        let out = match out {
            Some(dir) => dir,
            None => config.out()?.to_path_buf(),
        };
        Ok(Self { config, seed, out })
    }

    fn plan(&self) -> SeedPlan {
        SeedPlan::new(self.seed)
    }

    fn prepare_out(&self) -> Result<&Path, CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn theta_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["theta".into()]
    } else {
        (0..dim).map(|i| format!("theta_{i}")).collect()
    }
}

pub fn tune(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let prior = cfg.prior()?;
    let policy = cfg.policy()?;
    let n = cfg.n()?;
    let section = cfg.section("tune", &cfg.tune)?;
    let theta0 = policy
        .params()
        .ok_or_else(|| CliError::Config(format!("policy `{}` has no tunable parameters", policy.name())))?;
    if section.eval_every == 0 {
        return Err(CliError::Config("tune.eval_every must be positive".into()));
    }
    let mut gb = GradBandConfig::new(section.iterations, section.batch_size, section.baseline, theta0);
    if let Some(b) = section.calibration_batches {
        gb.calibration_batches = b;
    }
    if let Some(s) = section.safety_factor {
        gb.safety_factor = s;
    }
    gb.clip = section.clip;
    gb.average_tail = section.average_tail;
    gb.eval = Some(EvalSettings {
        n_eval: cfg.n_eval(),
        every: section.eval_every,
    });
    gb.validate(&policy, n)?;
    let out = ctx.prepare_out()?;

    let start = Instant::now();
    let run = match gradband(&gb, &policy, prior, n, &ctx.plan()) {
        Ok(run) => run,
        Err(gradband::Error::NonFiniteGradient {
            iteration,
            theta,
            gradient,
        }) => {
            let path = out.join("diagnostic.json");
            let fmt = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
            write_json(
                &path,
                &json!({
                    "error": "non-finite gradient",
                    "iteration": iteration,
                    "theta": fmt(&theta),
                    "gradient": fmt(&gradient),
                    "seed": ctx.seed,
                }),
            )?;
            return Err(CliError::Numerical {
                message: format!("non-finite gradient at iteration {iteration}"),
                diagnostic: path,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let wall = start.elapsed().as_secs_f64();

    let dim = run.theta0.len();
    let mut w = csv_writer(&out.join("run.csv"))?;
    let mut header = vec!["iteration".to_string()];
    header.extend(theta_header(dim));
    header.extend(["grad_norm", "alpha", "eval_regret", "eval_stderr"].map(String::from));
    w.write_record(&header)?;
    let mut row = vec!["0".to_string()];
    row.extend(run.theta0.iter().map(f64::to_string));
    row.extend([String::new(), String::new()]);
    row.push(opt(run.initial_eval.as_ref().map(|e| e.regret)));
    row.push(opt(run.initial_eval.as_ref().map(|e| e.stderr)));
    w.write_record(&row)?;
    for r in &run.records {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.theta.iter().map(f64::to_string));
        row.push(r.grad_norm.to_string());
        row.push(r.alpha.to_string());
        row.push(opt(r.eval.as_ref().map(|e| e.regret)));
        row.push(opt(r.eval.as_ref().map(|e| e.stderr)));
        w.write_record(&row)?;
    }
    w.flush()?;

    let final_policy = run.final_policy();
    write_json(&out.join("final_policy.json"), &final_policy)?;
    let final_eval = run.final_eval();
    write_json(
        &out.join("summary.json"),
        &json!({
            "policy": final_policy,
            "prior": prior,
            "n": n,
            "seed": ctx.seed,
            "iterations": gb.iterations,
            "batch_size": gb.batch_size,
            "baseline": gb.baseline,
            "clip": gb.clip,
            "average_tail": gb.average_tail,
            "final_theta": run.final_theta,
            "final_regret": final_eval.map(|e| e.regret),
            "final_stderr": final_eval.map(|e| e.stderr),
            "n_eval": cfg.n_eval(),
            "c": run.calibration.c,
            "calibration_fallback": run.calibration.fallback,
            "alpha": run.alpha,
            "wall_time_s": wall,
        }),
    )?;
    if run.calibration.fallback {
        eprintln!("warning: all calibration gradients were zero; using c = 1");
    }
    if let Some(e) = final_eval {
        println!(
            "{} tuned to theta = {:?}: regret {:.3} +- {:.3} ({:.1} s)",
            final_policy.name(),
            run.final_theta,
            e.regret,
            e.stderr,
            wall
        );
    }
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let prior = cfg.prior()?;
    let policy = cfg.policy()?;
    let n = cfg.n()?;
    let grid = &cfg.section("sweep", &cfg.sweep)?.theta_grid;
    if grid.is_empty() {
        return Err(CliError::Config("sweep.theta_grid must not be empty".into()));
    }
    if !policy.is_differentiable() {
        return Err(CliError::Config(format!("policy `{}` has no parameter to sweep", policy.name())));
    }
    let rows = regret_sweep(&policy, grid, prior, n, cfg.n_eval(), &ctx.plan())?;
    let out = ctx.prepare_out()?;
    let mut w = csv_writer(&out.join("sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn variance(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let prior = cfg.prior()?;
    let policy = cfg.policy()?;
    let n = cfg.n()?;
    let section = cfg.section("variance", &cfg.variance)?;
    if section.theta_grid.is_empty() {
        return Err(CliError::Config("variance.theta_grid must not be empty".into()));
    }
    if section.baselines.is_empty() {
        return Err(CliError::Config("variance.baselines must not be empty".into()));
    }
    if section.m < 2 {
        return Err(CliError::Config("variance.m must be at least 2".into()));
    }
    let rows = gradient_variance_profile(&policy, prior, n, &section.theta_grid, section.m, &section.baselines, &ctx.plan())?;
    let out = ctx.prepare_out()?;
    let mut w = csv_writer(&out.join("variance.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn bench(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let prior = cfg.prior()?;
    let n = cfg.n()?;
    let section = cfg.section("bench", &cfg.bench)?;
    if section.policies.is_empty() {
        return Err(CliError::Config("bench.policies must not be empty".into()));
    }
    let policies = section.policies.iter().map(|p| p.resolve()).collect::<Result<Vec<_>, _>>()?;
    let rows = benchmark_table(prior, n, &policies, cfg.n_eval(), &ctx.plan())?;
    let out = ctx.prepare_out()?;
    let mut w = csv_writer(&out.join("bench.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    print!("{}", render_table(&rows));
    Ok(())
}

#[derive(Serialize)]
struct ConcavityRow {
    theta: f64,
    closed_form: f64,
    second_diff: Option<f64>,
    mc_reward: Option<f64>,
    mc_stderr: Option<f64>,
}

/// Grid indices checked by simulation: `count` points spread evenly.
fn spread_indices(len: usize, count: usize) -> Vec<usize> {
    match count.min(len) {
        0 => Vec::new(),
        1 => vec![len / 2],
        c => (0..c).map(|i| i * (len - 1) / (c - 1)).collect(),
    }
}

pub fn concavity(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let n = cfg.n()?;
    let section = cfg.section("concavity", &cfg.concavity)?;
    let grid = match &section.theta_grid {
        Some(g) => g.clone(),
        None => (2..=2 * (n / 2)).map(|i| i as f64 / 2.0).collect(),
    };
    if grid.len() < 3 {
        return Err(CliError::Config(format!(
            "concavity needs at least 3 grid points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config("concavity.theta_grid must be strictly increasing".into()));
    }
    let step = grid[1] - grid[0];
    if grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-12 * step.max(1.0)) {
        return Err(CliError::Config("concavity.theta_grid must be evenly spaced".into()));
    }
    let closed = grid
        .iter()
        .map(|&t| mixture_etc_reward(&section.mixture, n, t))
        .collect::<Result<Vec<_>, _>>()?;
    let diffs = second_differences(&closed);
    let max_diff = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let concave = max_diff <= CONCAVITY_TOL;

    let plan = ctx.plan();
    let mut rows: Vec<ConcavityRow> = grid
        .iter()
        .zip(&closed)
        .enumerate()
        .map(|(i, (&theta, &closed_form))| ConcavityRow {
            theta,
            closed_form,
            second_diff: (i > 0 && i + 1 < grid.len()).then(|| diffs[i - 1]),
            mc_reward: None,
            mc_stderr: None,
        })
        .collect();
    let mut max_z: f64 = 0.0;
    for i in spread_indices(grid.len(), section.mc_points) {
        let (mc, se) = etc_mixture_mc_reward(&section.mixture, n, grid[i], section.mc_rollouts, &plan.fork(&format!("theta-{i}")))?;
        rows[i].mc_reward = Some(mc);
        rows[i].mc_stderr = Some(se);
        let z = if se > 0.0 { (mc - closed[i]).abs() / se } else if mc == closed[i] { 0.0 } else { f64::INFINITY };
        max_z = max_z.max(z);
    }
    let mc_agrees = max_z <= 3.0;

    let out = ctx.prepare_out()?;
    let mut w = csv_writer(&out.join("concavity.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let pass = concave && mc_agrees;
    write_json(
        &out.join("concavity.json"),
        &json!({
            "pass": pass,
            "concave": concave,
            "max_second_difference": max_diff,
            "tolerance": CONCAVITY_TOL,
            "mc_agrees": mc_agrees,
            "max_mc_z": max_z,
            "n": n,
            "seed": ctx.seed,
        }),
    )?;
    println!(
        "concavity {}: max second difference {:e}, max |mc - closed form| / se = {:.2}",
        if pass { "PASS" } else { "FAIL" },
        max_diff,
        max_z
    );
    Ok(())
}

//! `gradband` command-line front end.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 config error, 3 numerical abort.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Learn and evaluate bandit exploration policies.
#[derive(Parser, Debug)]
#[command(name = "gradband", version, about)]
struct Cli {
    /// Experiment configuration (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config value
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (0 = one per core); outputs do not depend on it
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    workers: usize,

    /// Output directory; overrides the config value
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Optimize a policy with GradBand: run.csv, final_policy.json, summary.json
    Tune,
    /// Bayes regret over a parameter grid: sweep.csv
    Sweep,
    /// Gradient mean and variance per baseline over a grid: variance.csv
    Variance,
    /// Benchmark table of several policies: bench.csv
    Bench,
    /// Concavity check of explore-then-commit: concavity.csv, concavity.json
    Concavity,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let config = ExperimentConfig::load(&path)?;
    let ctx = Context::new(config, cli.seed, cli.out)?;
    let command = cli.command;
    gradband::with_workers(cli.workers, move || match command {
        Command::Tune => commands::tune(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Variance => commands::variance(&ctx),
        Command::Bench => commands::bench(&ctx),
        Command::Concavity => commands::concavity(&ctx),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

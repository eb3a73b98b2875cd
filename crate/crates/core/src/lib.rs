//! Policy-gradient tuning of multi-armed bandit policies.
//!
//! Bandit problems are drawn from a prior over instances ([`priors`]); a
//! policy ([`policies`]) is run on a pre-sampled reward matrix
//! ([`bandit::rollout`]) and its parameters are improved by stochastic
//! gradient ascent on the Bayes reward ([`optimizer::gradband`]) using
//! score-function gradients with variance-reducing baselines ([`gradient`]).
//! [`evaluation`] estimates Bayes regret and builds benchmark tables.
//!
//! Every random draw comes from a stream derived from a [`rng::SeedPlan`] and
//! the (iteration, sample) indices of the draw, so all results are
//! reproducible bit for bit whatever the number of worker threads.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod error;
pub mod evaluation;
pub mod gradient;
pub mod optimizer;
pub mod policies;
pub mod priors;
pub mod rng;

pub use bandit::{argmax, rollout, InstanceSpec, RewardMatrix, RolloutTrace};
pub use error::{Error, Result};
pub use evaluation::{bayes_regret, RegretReport};
pub use gradient::{batch_gradient, sample_gradient, BaselineInput, BaselineKind, GradEstimate};
pub use optimizer::{gradband, GradBandConfig, OptimizationRun};
pub use policies::{Policy, PolicySpec, PolicyState};
pub use priors::{ArmDistribution, PriorSpec};
pub use rng::{derive_stream, Purpose, SeedPlan, Stream};

/// Runs `f` on a dedicated thread pool with `workers` threads. Results never
/// depend on the worker count; only wall time does.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to start worker threads")
        .install(f)
}

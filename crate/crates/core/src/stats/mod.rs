//! Random streams, replica scheduling and estimate aggregation.

mod estimate;
mod rng;
mod runner;

pub use estimate::{difference, merge_estimates, ratio, Estimate};
pub use rng::{default_seed, split_stream, RngStream, DEFAULT_SEED, SEED_ENV};
pub use runner::{estimate_replicas, estimate_replicas_multi, run_replicas, Replicas};

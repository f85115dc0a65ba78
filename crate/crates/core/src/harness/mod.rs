//! Synthetic-world generation and the end-to-end experiment harness
//! comparing the synthesized policy against the Laplace, no-obfuscation
//! and random baselines.

mod config;
mod experiment;
mod world;

pub use config::parse_epsilon;
pub use experiment::{
    build_clients, evaluate_coverage, profiling_auc, run_baseline_laplace,
    run_baseline_laplace_scaled, run_baseline_no, run_baseline_random, run_experiment,
    derive_seed, ExperimentConfig, ExperimentReport, Method, MethodAggregate, ProfileMethod,
    TrialError, TrialRow,
};
pub use world::{generate_world, sample_poisson, PiSpec, WorldConfig};

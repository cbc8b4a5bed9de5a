//! Experiment configuration, runner and result files for the `sparsetest` binary.

pub mod config;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, ExperimentRecord, FailureKind, RunError};

//! Experiment runner for `abem-core`: configuration files, the problem
//! catalogue and artifact output.

pub mod catalogue;
pub mod config;
pub mod experiment;
pub mod svg;

pub use config::{ConfigError, ExperimentConfig, ProblemSpec, RhsSpec};
pub use experiment::{run_experiment, write_artifacts, RunError, RunOutcome};

/// Exit status of `abemlab verify` when a trace violates A1 or A2.
pub const EXIT_VIOLATION: i32 = 3;

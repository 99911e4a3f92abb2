//! Batch driver: reads an experiment config, runs the requested
//! assemblies and checks, and writes a deterministic JSON report.

pub mod config;
pub mod error;
pub mod explain;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Task, Tolerances};
pub use error::CliError;
pub use report::Report;
pub use run::{execute, run, RunOptions, RunOutcome};

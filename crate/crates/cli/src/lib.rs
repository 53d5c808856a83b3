//! Configuration, orchestration and output management for spikefield experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use error::{CliError, CliResult};
pub use run::{run, run_file, Check, RunOptions, RunReport};

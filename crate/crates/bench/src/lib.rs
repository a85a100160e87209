//! Experiment runner for streaming mixture-weight estimators.

pub mod config;
pub mod error;
pub mod output;
pub mod record;
pub mod run;
pub mod svg;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{BenchError, BenchResult};
pub use record::ExperimentRecord;
pub use run::{run_experiment, RunOptions};

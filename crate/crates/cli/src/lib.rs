//! Configuration loading, experiment grids, result files and summaries for the
//! `uavmec` simulator.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod summary;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, run_grid, MetricsFile, RunEntry, RunMetrics, RunStatus};
pub use summary::{Check, Summary, Verdict};

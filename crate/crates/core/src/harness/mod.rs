//! Experiment orchestration: configuration, the training loop, evaluation,
//! metric files and the command-line front end.

mod checks;
mod cli;
mod config;
mod metrics;
mod sweep;
mod train;

pub use checks::{controller_checks, gradient_checks, monotonicity_check, window_pacing_check};
pub use cli::{cli, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
pub use config::{config_text, parse_config, parse_window, AelaSettings, ExperimentConfig, WindowSetting};
pub use metrics::{csv_string, emit_csv, emit_plot, parse_csv, plot_svg, MetricRow, RunLog, CSV_HEADER, CSV_SCHEMA};
pub use sweep::{aggregate_csv, median_curve, run_sweep, write_run, AggregateRow, SweepCell};
pub use train::{evaluate, median, run_training, EvalStats};

use crate::aela::AelaError;
use crate::envs::EnvError;
use crate::learners::LearnerError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Aela(#[from] AelaError),
}

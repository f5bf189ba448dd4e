//! Run and sweep drivers, their TOML inputs and CSV outputs.

mod execute;
mod output;
mod plan;
mod report;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::scenario::ScenarioError;
use crate::sim::ConfigError;

pub use execute::{
    report_rows, run_config, run_plan, run_scenario_file, write_run_outputs, RunOptions, RunOutcome, SweepOutcome,
};
pub use output::{read_csv, write_csv, AggregateRow, LedgerRow, NodeRow, ReportRow, SweepRow};
pub use plan::{Axis, ExperimentPlan, RunConfig, SweepPoint};
pub use report::{summarize, summarize_file, write_plot_files, ReportBlock, ReportSummary};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{} of {total} sweep points failed: {}", failed.len(), failed.join("; "))]
    PartialFailure { failed: Vec<String>, total: usize },
    #[error("{path}: not a sweep table: {message}")]
    Schema { path: PathBuf, message: String },
}

impl ExperimentError {
    /// True for errors caused by the user's inputs rather than by the run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ExperimentError::Toml { .. }
                | ExperimentError::Plan(_)
                | ExperimentError::Config(_)
                | ExperimentError::Scenario(_)
                | ExperimentError::Schema { .. }
        )
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> ExperimentError {
    let path = path.into();
    move |source| ExperimentError::Io { path, source }
}

pub(crate) fn csv_err(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> ExperimentError {
    let path = path.into();
    move |source| ExperimentError::Csv { path, source }
}

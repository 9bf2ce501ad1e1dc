//! Experiment orchestration: datasets, configs, runs, reports and tables.

mod config;
mod dataset;
mod report;
mod run;
pub mod tables;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::catalog::CatalogError;
use crate::eval::EvalError;
use crate::gateway::GatewayError;
use crate::prompt::PromptError;
use crate::sampler::SamplerError;

pub use config::{cells_from_table, load_config, ExperimentConfig, DEFAULT_BIN_WIDTH};
pub use dataset::{database_path, discover_databases, load_dataset, Dataset};
pub use report::{emit_report, length_bins, load_reports, LengthBin, ReportFormat};
pub use run::{
    prepare, run_experiment, run_matrix, CellOutcome, ExampleRecord, Gateways, Planned, PlannedExample, Prepared, RunReport,
    SeedReport, SkipRecord,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    MalformedRecord { path: PathBuf, line: usize, message: String },
    #[error("database {db_id} not found at {}", path.display())]
    MissingDatabase { db_id: String, path: PathBuf },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("replay cache lacks {} request(s), first {}", missing.len(), missing.first().map_or("", String::as_str))]
    IncompleteReplayCache { missing: Vec<String> },
    #[error("prompt for example {example_id} leaks the test example")]
    Leakage { example_id: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;

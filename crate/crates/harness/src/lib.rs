//! Experiment orchestration: training per fold, white-box and black-box
//! evasion attacks, poisoning, and result tables.

pub mod config;
pub mod experiment;
pub mod output;
pub mod results;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, Mode, Precision};
pub use experiment::{
    accuracy_from_logs, run, run_evasion, run_poison, train_models, write_outputs, ExperimentData, FoldModels,
    RunOutput, Timing,
};
pub use results::{ResultRow, ResultTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset directory {} not found", .0.display())]
    DatasetMissing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Graph(#[from] cama_core::graph::GraphError),
    #[error(transparent)]
    Gnn(#[from] cama_core::gnn::GnnError),
    #[error(transparent)]
    Attack(#[from] cama_core::attack::AttackError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    /// Bad input rather than a failure during the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::DatasetMissing(_))
    }
}

//! Whole experiments: config files, repeated runs, result files and
//! cross-method comparison reports.

mod compare;
mod config;
mod run;

use thiserror::Error;

use crate::dataspace::DataError;
use crate::ensemble::EnsembleError;
use crate::search::SearchError;

pub use compare::{compare_dirs, load_results, CompareReport, DatasetComparison, MethodSummary, PairComparison};
pub use config::RunConfig;
pub use run::{
    load_projects, run, run_once, synth_to_dir, write_run, ArchiveEntry, RunMetadata, RunOutcome, RunResult, RunTiming,
    RESULT_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error in {context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error("{method} on {dataset}: {got} repeats, at least 2 are required")]
    InsufficientRepeats { method: String, dataset: String, got: usize },
    #[error("result file {path}: {reason}")]
    BadResult { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

impl ExperimentError {
    /// Process exit code: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data { .. }
            | ExperimentError::InsufficientRepeats { .. }
            | ExperimentError::BadResult { .. }
            | ExperimentError::Io { .. } => 3,
            ExperimentError::Search(_) | ExperimentError::Ensemble(_) => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ExperimentError::Io { path: path.display().to_string(), source }
    }
}

//! Reproducible experiment runs over JSONL task datasets.
//!
//! The stages mirror the command-line front-end: [`ingest`] exports each
//! instance's base commit into a content-addressed workspace, [`run`]
//! executes one strategy and writes per-instance records plus a manifest,
//! [`eval`] scores completed runs, and [`report`] renders combined tables.

mod dataset;
mod eval;
mod run;
mod workspace;

pub use dataset::{load_dataset, Dataset, TaskInstance};
pub use eval::{
    eval, evaluate_run, load_rows, report, toolset_label, EvalDiagnostics, EvalSummary, GoldRecord,
    RunEvaluation, ROWS_FILE,
};
pub use run::{
    load_results, record_file_name, run, InstanceCounts, InstanceRecord, InstanceStatus,
    PolicySpec, RunConfig, RunManifest, RunOptions, RunSummary, INSTANCES_DIR, MANIFEST_FILE,
    RESULTS_FILE,
};
pub use workspace::{
    find_clone, index_cache_path, ingest, is_materialized, load_repo_context, workspace_dir,
    IngestReport, IngestStatus, WORKSPACE_MARKER,
};

use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}: no manifest; the run is missing or incomplete")]
    MissingManifest(PathBuf),
    #[error("workspace {0} has not been materialized")]
    Unavailable(PathBuf),
    #[error("{0}")]
    Corpus(String),
    #[error("run interrupted after {processed} of {total} instances")]
    Interrupted { processed: usize, total: usize },
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Errors caused by invalid input rather than by the environment.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Dataset { .. }
                | ExperimentError::MissingManifest(_)
        )
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames it into place.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ExperimentError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| ExperimentError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| ExperimentError::io(path, e.error))?;
    Ok(())
}

//! Repository snapshots, code entities and token accounting.

mod entity;
mod glob;
mod python;
mod snapshot;
mod tokens;

pub use entity::{
    CodeEntity, CodeIndex, EntityExtractor, EntityKind, Extraction, ExtractorRegistry,
};
pub use glob::{GlobError, PathFilter};
pub use python::PythonExtractor;
pub use snapshot::{
    load_snapshot, snapshot_stats, RepoSnapshot, SnapshotOptions, SnapshotStats, SourceFile,
};
pub use tokens::{count_tokens, BpeModel, TokenCounter, TokenCounterConfig};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

/// Inclusive, 1-based range of lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    /// Panics unless `1 <= start <= end`.
    pub fn new(start: usize, end: usize) -> Self {
        Self::try_new(start, end).unwrap_or_else(|| panic!("invalid line span {start}-{end}"))
    }

    pub fn try_new(start: usize, end: usize) -> Option<Self> {
        (start >= 1 && start <= end).then_some(LineSpan { start, end })
    }

    pub fn single(line: usize) -> Self {
        LineSpan::new(line, line)
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Shares at least one line with `other`.
    pub fn overlaps(&self, other: &LineSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn union(&self, other: &LineSpan) -> LineSpan {
        LineSpan {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("repository root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("invalid path pattern: {0}")]
    Pattern(#[from] GlobError),
    #[error("cannot walk {path}: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
    #[error("token counter: {0}")]
    TokenCounter(String),
}

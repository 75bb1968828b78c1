//! The two retrieval toolsets: BM25 over code chunks and structure-aware
//! name/fragment search.

mod bm25;
mod chunk;
mod structure;
mod terms;

pub use bm25::{Bm25Index, Bm25Params};
pub use chunk::{build_chunks, Document, DEFAULT_WINDOW};
pub use structure::{StructureSearch, ToolOutcome, DEFAULT_RESULT_LIMIT};
pub use terms::index_term_split;

use crate::corpus::LineSpan;
use serde::{Deserialize, Serialize};

/// One result returned by a retrieval tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub file: String,
    pub span: LineSpan,
    /// Exactly the file content at `span`.
    pub snippet: String,
    /// BM25 score; absent for structure tools.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    /// Name of the tool that produced the hit.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("unknown document id {0:?}")]
    UnknownDocument(String),
    #[error("file {0:?} is not part of the repository snapshot")]
    UnknownFile(String),
    #[error("search fragment must not be empty")]
    EmptyFragment,
}

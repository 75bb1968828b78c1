//! Context retrieval laboratory for repository-level code editing.
//!
//! The crate is split along the pipeline:
//!
//! - [`corpus`] loads a repository checkout, extracts Python classes and
//!   functions with line spans, and counts tokens.
//! - [`retrieval`] provides the two toolsets: an Okapi BM25 index over code
//!   chunks and structure-aware name/fragment search.
//! - [`agent`] runs the single-shot baseline and the ReAct loop under the
//!   Context-Length, Tool-Call and Self-Reflection stopping criteria.
//! - [`evaluation`] turns gold patches into file/entity localizations and
//!   scores gathered context with precision, recall and F1.
//! - [`experiment`] ties everything into reproducible runs over JSONL task
//!   datasets (ingest, index, run, eval, report).
//!
//! Data-parallel work (file parsing, index construction, per-instance runs
//! and scoring) goes through [`exec::Execution`], which uses rayon when the
//! `parallel` feature is enabled and degrades to plain iteration otherwise.

pub mod agent;
pub mod corpus;
pub mod evaluation;
pub mod exec;
pub mod experiment;
pub mod retrieval;

pub use corpus::{
    CodeEntity, CodeIndex, EntityKind, LineSpan, RepoSnapshot, SourceFile, TokenCounter,
    TokenCounterConfig,
};
pub use exec::Execution;

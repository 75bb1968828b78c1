//! Scoring gathered context against gold patches.

mod correlation;
mod gold;
mod metrics;
mod patch;
mod report;

pub use correlation::{
    correlation_report, pearson, CorrelationError, CorrelationReport, ReasoningLevel,
    ScopeCorrelations,
};
pub use gold::{
    gold_entities, gold_files, retrieved_entities, retrieved_files, EntityGold, EntityRef,
    GoldLocalization,
};
pub use metrics::{
    aggregate, f1_score, prf, Aggregate, InstanceMetrics, MetricError, Prf, Scope, ScopeMean,
};
pub use patch::{parse_patch, FileChange, GoldPatch, Hunk, LineOp, PatchError};
pub use report::{bold_mask, display_metric, render_csv, render_markdown, StrategyRow};

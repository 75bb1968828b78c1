//! Pearson correlations between strategy quality, reasoning level and
//! context length.

use super::metrics::Scope;
use super::report::StrategyRow;
use crate::agent::Stopping;
use serde::{Deserialize, Serialize};

/// Ordinal position on the reasoning axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningLevel {
    Baseline,
    Cl,
    Tc,
    Sr,
    /// AutoCodeRover's own loop; only appears in externally supplied rows.
    AcrCustom,
}

impl ReasoningLevel {
    pub const ENCODING: &'static str = "baseline=0, cl=1, tc=2, sr=3, acr=4";

    pub fn ordinal(self) -> u8 {
        match self {
            ReasoningLevel::Baseline => 0,
            ReasoningLevel::Cl => 1,
            ReasoningLevel::Tc => 2,
            ReasoningLevel::Sr => 3,
            ReasoningLevel::AcrCustom => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReasoningLevel::Baseline => "Baseline",
            ReasoningLevel::Cl => "ReAct + CL",
            ReasoningLevel::Tc => "ReAct + TC",
            ReasoningLevel::Sr => "ReAct + SR",
            ReasoningLevel::AcrCustom => "ACR (custom)",
        }
    }
}

impl From<Stopping> for ReasoningLevel {
    fn from(s: Stopping) -> Self {
        match s {
            Stopping::Baseline => ReasoningLevel::Baseline,
            Stopping::Cl => ReasoningLevel::Cl,
            Stopping::Tc => ReasoningLevel::Tc,
            Stopping::Sr => ReasoningLevel::Sr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("correlation undefined: {0} is constant")]
    Constant(String),
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(CorrelationError::TooFewPoints(n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CorrelationError::Constant("x".into()));
    }
    if syy == 0.0 {
        return Err(CorrelationError::Constant("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeCorrelations {
    pub rows: usize,
    pub precision_vs_reasoning: Result<f64, CorrelationError>,
    pub recall_vs_reasoning: Result<f64, CorrelationError>,
    pub precision_vs_ctxlen: Result<f64, CorrelationError>,
    pub recall_vs_ctxlen: Result<f64, CorrelationError>,
}

impl ScopeCorrelations {
    pub fn pairs(&self) -> [(&'static str, &Result<f64, CorrelationError>); 4] {
        [
            ("precision_vs_reasoning", &self.precision_vs_reasoning),
            ("recall_vs_reasoning", &self.recall_vs_reasoning),
            ("precision_vs_ctxlen", &self.precision_vs_ctxlen),
            ("recall_vs_ctxlen", &self.recall_vs_ctxlen),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub encoding: String,
    pub file: ScopeCorrelations,
    pub entity: ScopeCorrelations,
}

impl CorrelationReport {
    pub fn scope(&self, scope: Scope) -> &ScopeCorrelations {
        match scope {
            Scope::File => &self.file,
            Scope::Entity => &self.entity,
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "Pearson correlations over strategy rows pooled across toolsets and datasets \
             (reasoning encoding: {}).\n\n| Scope | Pair | r |\n|---|---|---|\n",
            self.encoding
        );
        for scope in [Scope::File, Scope::Entity] {
            for (name, value) in self.scope(scope).pairs() {
                let cell = match value {
                    Ok(r) => format!("{r:.3}"),
                    Err(e) => format!("undefined ({e})"),
                };
                out.push_str(&format!("| {scope} | {name} | {cell} |\n"));
            }
        }
        out
    }
}

/// Correlations at each scope over the rows that carry that scope.
pub fn correlation_report(rows: &[StrategyRow]) -> Result<CorrelationReport, CorrelationError> {
    if rows.len() < 2 {
        return Err(CorrelationError::TooFewPoints(rows.len()));
    }
    let scope = |scope: Scope| {
        let present: Vec<(&StrategyRow, _)> = rows
            .iter()
            .filter_map(|r| r.scope(scope).map(|p| (r, p)))
            .collect();
        let reasoning: Vec<f64> = present
            .iter()
            .map(|(r, _)| f64::from(r.reasoning_level.ordinal()))
            .collect();
        let ctxlen: Vec<f64> = present.iter().map(|(r, _)| r.avg_context_tokens).collect();
        let precision: Vec<f64> = present.iter().map(|(_, p)| p.precision).collect();
        let recall: Vec<f64> = present.iter().map(|(_, p)| p.recall).collect();
        ScopeCorrelations {
            rows: present.len(),
            precision_vs_reasoning: pearson(&precision, &reasoning),
            recall_vs_reasoning: pearson(&recall, &reasoning),
            precision_vs_ctxlen: pearson(&precision, &ctxlen),
            recall_vs_ctxlen: pearson(&recall, &ctxlen),
        }
    };
    Ok(CorrelationReport {
        encoding: ReasoningLevel::ENCODING.to_string(),
        file: scope(Scope::File),
        entity: scope(Scope::Entity),
    })
}

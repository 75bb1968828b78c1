//! Precision, recall and F1 per instance, and their macro averages.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("no instances to aggregate")]
    NoInstances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Precision is 0 for an empty retrieval.
pub fn prf<T: Ord>(retrieved: &BTreeSet<T>, gold: &BTreeSet<T>) -> Result<Prf, MetricError> {
    if gold.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    let hits = retrieved.intersection(gold).count() as f64;
    let precision = if retrieved.is_empty() {
        0.0
    } else {
        hits / retrieved.len() as f64
    };
    Ok(Prf::new(precision, hits / gold.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    File,
    Entity,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scope::File => "file",
            Scope::Entity => "entity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub instance_id: String,
    pub scope: Scope,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub context_tokens: usize,
}

impl InstanceMetrics {
    pub fn new(instance_id: &str, scope: Scope, prf: Prf, context_tokens: usize) -> Self {
        InstanceMetrics {
            instance_id: instance_id.to_string(),
            scope,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            context_tokens,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScopeMean {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub instances: usize,
}

impl ScopeMean {
    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// Macro averages over instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub file: Option<ScopeMean>,
    pub entity: Option<ScopeMean>,
    /// Mean context tokens over distinct scored instances.
    pub avg_context_tokens: f64,
    pub instances: usize,
}

impl Aggregate {
    pub fn scope(&self, scope: Scope) -> Option<&ScopeMean> {
        match scope {
            Scope::File => self.file.as_ref(),
            Scope::Entity => self.entity.as_ref(),
        }
    }
}

pub fn aggregate(metrics: &[InstanceMetrics]) -> Result<Aggregate, MetricError> {
    if metrics.is_empty() {
        return Err(MetricError::NoInstances);
    }
    let scope_mean = |scope: Scope| {
        let rows: Vec<&InstanceMetrics> = metrics.iter().filter(|m| m.scope == scope).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&InstanceMetrics) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / n;
        Some(ScopeMean {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            instances: rows.len(),
        })
    };
    let tokens: BTreeMap<&str, usize> = metrics
        .iter()
        .map(|m| (m.instance_id.as_str(), m.context_tokens))
        .collect();
    Ok(Aggregate {
        file: scope_mean(Scope::File),
        entity: scope_mean(Scope::Entity),
        avg_context_tokens: tokens.values().sum::<usize>() as f64 / tokens.len() as f64,
        instances: tokens.len(),
    })
}

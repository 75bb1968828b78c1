//! Scoring completed runs and assembling result tables.

use super::run::{load_results, InstanceStatus, RunManifest};
use super::workspace::{is_materialized, load_repo_context, workspace_dir};
use super::{atomic_write, Dataset, ExperimentError, TaskInstance};
use crate::agent::ToolsetKind;
use crate::evaluation::{
    aggregate, correlation_report, prf, render_csv, render_markdown, retrieved_entities,
    retrieved_files, CorrelationReport, EntityRef, GoldLocalization, InstanceMetrics, Scope,
    StrategyRow,
};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub const ROWS_FILE: &str = "rows.json";

pub fn toolset_label(kind: ToolsetKind) -> &'static str {
    match kind {
        ToolsetKind::Bm25 => "BM25",
        ToolsetKind::Acr => "ACR Tools",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDiagnostics {
    /// Instances whose run failed; not scored.
    pub failed_runs: Vec<String>,
    /// Instances excluded at a scope because their gold set is empty.
    pub empty_gold_file: Vec<String>,
    pub empty_gold_entity: Vec<String>,
    /// Gold files absent from the snapshot, per instance.
    pub missing_files: BTreeMap<String, Vec<String>>,
    /// Changes outside every entity, per instance (only nonzero counts).
    pub module_level_changes: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub instance_id: String,
    pub files: BTreeSet<String>,
    pub entities: BTreeSet<EntityRef>,
    pub retrieved_files: BTreeSet<String>,
    pub retrieved_entities: BTreeSet<EntityRef>,
}

#[derive(Debug, Clone)]
pub struct RunEvaluation {
    pub run_name: String,
    pub manifest: RunManifest,
    pub row: Option<StrategyRow>,
    pub metrics: Vec<InstanceMetrics>,
    pub gold: Vec<GoldRecord>,
    pub diagnostics: EvalDiagnostics,
}

enum Scored {
    Failed,
    Done {
        gold: Box<GoldLocalization>,
        record: GoldRecord,
        context_tokens: usize,
    },
}

/// Scores one completed run. Refuses runs without a manifest.
pub fn evaluate_run(
    run_dir: &Path,
    dataset: &Dataset,
    workspaces: &Path,
    exec: Execution,
) -> Result<RunEvaluation, ExperimentError> {
    let manifest = RunManifest::load(run_dir)?;
    if manifest.dataset_sha256 != dataset.sha256 {
        return Err(ExperimentError::Config(format!(
            "{} was produced from a different dataset than {}",
            run_dir.display(),
            dataset.path.display()
        )));
    }
    let results = load_results(run_dir)?;
    let by_id: BTreeMap<&str, &TaskInstance> = dataset
        .instances
        .iter()
        .map(|i| (i.instance_id.as_str(), i))
        .collect();

    let scored = exec.map(&results, |record| -> Result<Scored, ExperimentError> {
        let Some(inst) = by_id.get(record.instance_id.as_str()) else {
            return Err(ExperimentError::Config(format!(
                "run contains unknown instance {}",
                record.instance_id
            )));
        };
        if record.status == InstanceStatus::Failed {
            return Ok(Scored::Failed);
        }
        let workspace = workspace_dir(workspaces, &inst.repo, &inst.base_commit);
        if !is_materialized(&workspace) {
            return Err(ExperimentError::Unavailable(workspace));
        }
        let repo = load_repo_context(
            &workspace,
            manifest.chunk_window,
            manifest.bm25,
            Execution::Sequential,
        )?;
        let gold =
            GoldLocalization::from_patch(&inst.parsed_patch(), &repo.snapshot, &repo.code_index);
        let record_out = GoldRecord {
            instance_id: record.instance_id.clone(),
            files: gold.files.clone(),
            entities: gold.entities.clone(),
            retrieved_files: retrieved_files(&record.context),
            retrieved_entities: retrieved_entities(&record.context, &repo.code_index),
        };
        Ok(Scored::Done {
            gold: Box::new(gold),
            record: record_out,
            context_tokens: record.context.total_tokens(),
        })
    });

    let mut diagnostics = EvalDiagnostics::default();
    let mut metrics = Vec::new();
    let mut gold_records = Vec::new();
    for (record, scored) in results.iter().zip(scored) {
        let id = &record.instance_id;
        let (gold, g, tokens) = match scored? {
            Scored::Failed => {
                diagnostics.failed_runs.push(id.clone());
                continue;
            }
            Scored::Done {
                gold,
                record,
                context_tokens,
            } => (gold, record, context_tokens),
        };
        if !gold.missing_files.is_empty() {
            diagnostics
                .missing_files
                .insert(id.clone(), gold.missing_files.clone());
        }
        if gold.module_level_changes > 0 {
            diagnostics
                .module_level_changes
                .insert(id.clone(), gold.module_level_changes);
        }
        match prf(&g.retrieved_files, &g.files) {
            Ok(p) => metrics.push(InstanceMetrics::new(id, Scope::File, p, tokens)),
            Err(_) => diagnostics.empty_gold_file.push(id.clone()),
        }
        match prf(&g.retrieved_entities, &g.entities) {
            Ok(p) => metrics.push(InstanceMetrics::new(id, Scope::Entity, p, tokens)),
            Err(_) => diagnostics.empty_gold_entity.push(id.clone()),
        }
        gold_records.push(g);
    }
    let row = aggregate(&metrics).ok().map(|agg| {
        StrategyRow::from_aggregate(
            &manifest.dataset_name,
            toolset_label(manifest.strategy.toolset),
            manifest.strategy.stopping.into(),
            &agg,
        )
    });
    Ok(RunEvaluation {
        run_name: manifest.output_dir.clone(),
        manifest,
        row,
        metrics,
        gold: gold_records,
        diagnostics,
    })
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub runs: Vec<RunEvaluation>,
    pub rows: Vec<StrategyRow>,
    pub correlation: Option<Result<CorrelationReport, String>>,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializes") + "\n")
        .collect()
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), ExperimentError> {
    atomic_write(&path, bytes)
}

/// Scores each run and writes, under `out`:
/// `<run>/metrics.jsonl`, `<run>/gold.jsonl`, `<run>/summary.json`, plus the
/// combined `rows.json`, `table.md`, `table.csv`, and `correlation.{json,md}`
/// when at least two runs are given.
pub fn eval(
    run_dirs: &[PathBuf],
    dataset: &Dataset,
    workspaces: &Path,
    out: &Path,
    exec: Execution,
) -> Result<EvalSummary, ExperimentError> {
    let mut runs = Vec::new();
    for dir in run_dirs {
        runs.push(evaluate_run(dir, dataset, workspaces, exec)?);
    }
    for run in &runs {
        let dir = out.join(&run.run_name);
        std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        write(dir.join("metrics.jsonl"), jsonl(&run.metrics).as_bytes())?;
        write(dir.join("gold.jsonl"), jsonl(&run.gold).as_bytes())?;
        let summary = serde_json::json!({
            "run": run.run_name,
            "strategy": run.manifest.strategy,
            "policy": run.manifest.policy,
            "averaging": "macro",
            "row": run.row,
            "diagnostics": run.diagnostics,
        });
        write(
            dir.join("summary.json"),
            &serde_json::to_vec_pretty(&summary).expect("serializes"),
        )?;
    }
    let rows: Vec<StrategyRow> = runs.iter().filter_map(|r| r.row.clone()).collect();
    write(
        out.join(ROWS_FILE),
        &serde_json::to_vec_pretty(&rows).expect("serializes"),
    )?;
    write(out.join("table.md"), render_markdown(&rows).as_bytes())?;
    write(out.join("table.csv"), render_csv(&rows).as_bytes())?;
    let correlation =
        (run_dirs.len() >= 2).then(|| correlation_report(&rows).map_err(|e| e.to_string()));
    if let Some(report) = &correlation {
        let (json, md) = match report {
            Ok(r) => (
                serde_json::to_vec_pretty(r).expect("serializes"),
                r.to_markdown(),
            ),
            Err(e) => (
                serde_json::to_vec_pretty(&serde_json::json!({ "error": e })).expect("serializes"),
                format!("Correlations unavailable: {e}\n"),
            ),
        };
        write(out.join("correlation.json"), &json)?;
        write(out.join("correlation.md"), md.as_bytes())?;
    }
    Ok(EvalSummary {
        runs,
        rows,
        correlation,
    })
}

/// Collects rows from eval output directories (their `rows.json`) or from
/// JSON files holding a list of rows.
pub fn load_rows(inputs: &[PathBuf]) -> Result<Vec<StrategyRow>, ExperimentError> {
    let mut rows = Vec::new();
    for input in inputs {
        let path = if input.is_dir() {
            input.join(ROWS_FILE)
        } else {
            input.clone()
        };
        let bytes = std::fs::read(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let mut more: Vec<StrategyRow> =
            serde_json::from_slice(&bytes).map_err(|e| ExperimentError::json(&path, e))?;
        rows.append(&mut more);
    }
    Ok(rows)
}

/// Combined markdown table over all inputs.
pub fn report(inputs: &[PathBuf]) -> Result<String, ExperimentError> {
    Ok(render_markdown(&load_rows(inputs)?))
}

//! Executing one strategy over a dataset.

use super::workspace::{load_repo_context, workspace_dir};
use super::{atomic_write, sha256_hex, Dataset, ExperimentError, TaskInstance};
use crate::agent::{
    run_baseline, run_react, toolset_for, AgentError, ContextSet, Policy, RemotePolicy,
    RemotePolicyConfig, RunDiagnostics, ScriptedPolicy, StopReason, Stopping, StrategyConfig,
    TranscriptStep,
};
use crate::corpus::{TokenCounter, TokenCounterConfig};
use crate::exec::Execution;
use crate::retrieval::{Bm25Params, DEFAULT_WINDOW};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const INSTANCES_DIR: &str = "instances";
const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// A trace file shared by all instances, or a directory of
    /// `<instance_id>.trace` files.
    Scripted(PathBuf),
    Remote(RemotePolicyConfig),
}

impl FromStr for PolicySpec {
    type Err = String;

    /// `scripted:<path>` or `remote` (configured from the environment).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted policy needs a path".into());
            }
            Ok(PolicySpec::Scripted(PathBuf::from(path)))
        } else if s == "remote" {
            Ok(PolicySpec::Remote(RemotePolicyConfig::from_env()))
        } else {
            Err(format!(
                "unknown policy {s:?}; expected scripted:<path> or remote"
            ))
        }
    }
}

impl PolicySpec {
    fn kind(&self) -> &'static str {
        match self {
            PolicySpec::Scripted(_) => "scripted",
            PolicySpec::Remote(_) => "remote",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    pub policy: PolicySpec,
    pub tokenizer: TokenCounterConfig,
    pub chunk_window: usize,
    pub bm25: Bm25Params,
}

impl RunConfig {
    pub fn new(strategy: StrategyConfig, policy: PolicySpec) -> Self {
        RunConfig {
            strategy,
            policy,
            tokenizer: TokenCounterConfig::Approximate,
            chunk_window: DEFAULT_WINDOW,
            bm25: Bm25Params::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub output_root: PathBuf,
    pub workspaces: PathBuf,
    pub exec: Execution,
    /// Unix seconds recorded in the manifest.
    pub timestamp: u64,
    /// Stop after this many instances without writing the manifest, as an
    /// interrupted run would.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub status: InstanceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Absent for the baseline, which does not loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    pub context: ContextSet,
    pub transcript: Vec<TranscriptStep>,
    #[serde(default)]
    pub diagnostics: RunDiagnostics,
}

impl InstanceRecord {
    fn failed(id: &str, error: String) -> Self {
        InstanceRecord {
            instance_id: id.to_string(),
            status: InstanceStatus::Failed,
            error: Some(error),
            stop_reason: None,
            context: ContextSet::new(),
            transcript: Vec::new(),
            diagnostics: RunDiagnostics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCounts {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub tool_version: String,
    pub dataset: String,
    pub dataset_name: String,
    pub dataset_sha256: String,
    pub strategy: StrategyConfig,
    pub policy: String,
    pub tokenizer: TokenCounterConfig,
    pub chunk_window: usize,
    pub bm25: Bm25Params,
    pub timestamp: u64,
    /// Directory name under the output root.
    pub output_dir: String,
    pub config_hash: String,
    pub instances: InstanceCounts,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, ExperimentError> {
        let path = run_dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(ExperimentError::MissingManifest(run_dir.to_path_buf()));
        }
        let bytes = std::fs::read(&path).map_err(|e| ExperimentError::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| ExperimentError::json(&path, e))
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub failures: Vec<(String, String)>,
}

impl RunSummary {
    /// More than half of the instances failed.
    pub fn failed_above_threshold(&self) -> bool {
        self.manifest.instances.failed * 2 > self.manifest.instances.total
    }
}

enum Policies {
    None,
    Shared(Box<dyn Policy>),
    PerInstance(PathBuf),
}

impl Policies {
    fn descriptor(&self) -> String {
        match self {
            Policies::None => "none".into(),
            Policies::Shared(p) => p.descriptor(),
            Policies::PerInstance(dir) => format!("scripted:{}/<instance_id>.trace", dir.display()),
        }
    }
}

fn trace_file_name(instance_id: &str) -> String {
    format!("{instance_id}.trace")
}

/// Instance ids made safe for use as file names.
pub fn record_file_name(instance_id: &str) -> String {
    let safe: String = instance_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn policy_fingerprint(spec: &PolicySpec, dataset: &Dataset) -> Result<String, ExperimentError> {
    Ok(match spec {
        PolicySpec::Scripted(path) if path.is_dir() => {
            let mut traces = BTreeMap::new();
            for inst in &dataset.instances {
                let file = path.join(trace_file_name(&inst.instance_id));
                if let Ok(bytes) = std::fs::read(&file) {
                    traces.insert(inst.instance_id.clone(), sha256_hex(&bytes));
                }
            }
            serde_json::to_string(&traces).expect("map serializes")
        }
        PolicySpec::Scripted(path) => {
            sha256_hex(&std::fs::read(path).map_err(|e| ExperimentError::io(path, e))?)
        }
        PolicySpec::Remote(cfg) => serde_json::to_string(cfg).expect("config serializes"),
    })
}

/// Runs `config` over every instance of `dataset` and writes one record per
/// instance, `results.jsonl`, and finally `manifest.json`.
pub fn run(
    dataset: &Dataset,
    config: &RunConfig,
    options: &RunOptions,
) -> Result<RunSummary, ExperimentError> {
    let strategy = &config.strategy;
    strategy
        .validate()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let counter = TokenCounter::from_config(&config.tokenizer)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;

    let policies = if strategy.stopping == Stopping::Baseline {
        Policies::None
    } else {
        match &config.policy {
            PolicySpec::Scripted(path) if path.is_dir() => Policies::PerInstance(path.clone()),
            PolicySpec::Scripted(path) => Policies::Shared(Box::new(
                ScriptedPolicy::from_file(path)
                    .map_err(|e| ExperimentError::Config(e.to_string()))?,
            )),
            PolicySpec::Remote(cfg) => {
                if cfg.api_key.is_none() {
                    log::warn!("no API key set for the remote policy");
                }
                Policies::Shared(Box::new(RemotePolicy::new(cfg.clone())))
            }
        }
    };
    let policy_descriptor = policies.descriptor();
    let fingerprint = match policies {
        Policies::None => String::new(),
        _ => policy_fingerprint(&config.policy, dataset)?,
    };
    let hash_input = serde_json::json!({
        "dataset_sha256": dataset.sha256,
        "strategy": strategy,
        "policy": policy_descriptor,
        "policy_fingerprint": fingerprint,
        "tokenizer": config.tokenizer,
        "chunk_window": config.chunk_window,
        "bm25": config.bm25,
    });
    let config_hash = sha256_hex(hash_input.to_string().as_bytes());
    let policy_kind = match policies {
        Policies::None => "nopolicy",
        _ => config.policy.kind(),
    };
    let dir_name = format!(
        "{}__{}__{}__{}",
        dataset.name(),
        strategy.label(),
        policy_kind,
        &config_hash[..12]
    );
    let output_dir = options.output_root.join(&dir_name);
    let instances_dir = output_dir.join(INSTANCES_DIR);
    std::fs::create_dir_all(&instances_dir).map_err(|e| ExperimentError::io(&instances_dir, e))?;
    let manifest_path = output_dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|e| ExperimentError::io(&manifest_path, e))?;
    }

    let limit = options.stop_after.unwrap_or(usize::MAX);
    let selected: Vec<&TaskInstance> = dataset.instances.iter().take(limit).collect();
    // Instances run in parallel; each one's own indexing stays sequential.
    let records = options.exec.map(&selected, |inst| {
        let record = catch_unwind(AssertUnwindSafe(|| {
            run_instance(inst, config, &counter, &policies, &options.workspaces)
        }))
        .unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            InstanceRecord::failed(&inst.instance_id, format!("internal error: {msg}"))
        });
        let path = instances_dir.join(record_file_name(&inst.instance_id));
        let json = serde_json::to_vec_pretty(&record).expect("record serializes");
        atomic_write(&path, &json).map(|()| record)
    });
    let records: Vec<InstanceRecord> = records.into_iter().collect::<Result<_, _>>()?;
    if selected.len() < dataset.instances.len() {
        return Err(ExperimentError::Interrupted {
            processed: selected.len(),
            total: dataset.instances.len(),
        });
    }

    let mut jsonl = String::new();
    for record in &records {
        jsonl.push_str(&serde_json::to_string(record).expect("record serializes"));
        jsonl.push('\n');
    }
    atomic_write(&output_dir.join(RESULTS_FILE), jsonl.as_bytes())?;

    let failures: Vec<(String, String)> = records
        .iter()
        .filter(|r| r.status == InstanceStatus::Failed)
        .map(|r| (r.instance_id.clone(), r.error.clone().unwrap_or_default()))
        .collect();
    let manifest = RunManifest {
        format: MANIFEST_FORMAT,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: dataset.path.display().to_string(),
        dataset_name: dataset.name(),
        dataset_sha256: dataset.sha256.clone(),
        strategy: strategy.clone(),
        policy: policy_descriptor,
        tokenizer: config.tokenizer.clone(),
        chunk_window: config.chunk_window,
        bm25: config.bm25,
        timestamp: options.timestamp,
        output_dir: dir_name,
        config_hash,
        instances: InstanceCounts {
            total: records.len(),
            succeeded: records.len() - failures.len(),
            failed: failures.len(),
        },
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    atomic_write(&manifest_path, &json)?;
    Ok(RunSummary {
        output_dir,
        manifest,
        failures,
    })
}

fn run_instance(
    inst: &TaskInstance,
    config: &RunConfig,
    counter: &TokenCounter,
    policies: &Policies,
    workspaces: &Path,
) -> InstanceRecord {
    let workspace = workspace_dir(workspaces, &inst.repo, &inst.base_commit);
    let repo = match load_repo_context(
        &workspace,
        config.chunk_window,
        config.bm25,
        Execution::Sequential,
    ) {
        Ok(repo) => repo,
        Err(e) => return InstanceRecord::failed(&inst.instance_id, e.to_string()),
    };
    let strategy = &config.strategy;
    let task = inst.problem_statement.as_str();

    let scripted;
    let policy: &dyn Policy = match policies {
        Policies::None => {
            let context = run_baseline(&repo.bm25, task, strategy, counter);
            return InstanceRecord {
                instance_id: inst.instance_id.clone(),
                status: InstanceStatus::Ok,
                error: None,
                stop_reason: None,
                context,
                transcript: Vec::new(),
                diagnostics: RunDiagnostics::default(),
            };
        }
        Policies::Shared(p) => p.as_ref(),
        Policies::PerInstance(dir) => {
            let path = dir.join(trace_file_name(&inst.instance_id));
            scripted = match ScriptedPolicy::from_file(&path) {
                Ok(p) => p,
                Err(e) => return InstanceRecord::failed(&inst.instance_id, e.to_string()),
            };
            &scripted
        }
    };
    let tools = toolset_for(
        strategy.toolset,
        &repo,
        strategy.top_k,
        strategy.result_limit,
    );
    match run_react(tools.as_ref(), task, policy, strategy, counter) {
        Ok(outcome) => InstanceRecord {
            instance_id: inst.instance_id.clone(),
            status: InstanceStatus::Ok,
            error: None,
            stop_reason: Some(outcome.stop_reason),
            context: outcome.context,
            transcript: outcome.transcript,
            diagnostics: outcome.diagnostics,
        },
        Err(AgentError::Transport { source, partial }) => InstanceRecord {
            instance_id: inst.instance_id.clone(),
            status: InstanceStatus::Failed,
            error: Some(source.to_string()),
            stop_reason: None,
            context: partial.context,
            transcript: partial.transcript,
            diagnostics: partial.diagnostics,
        },
        Err(e) => InstanceRecord::failed(&inst.instance_id, e.to_string()),
    }
}

/// Reads `results.jsonl` of a completed run.
pub fn load_results(run_dir: &Path) -> Result<Vec<InstanceRecord>, ExperimentError> {
    let path = run_dir.join(RESULTS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ExperimentError::json(&path, e)))
        .collect()
}

#![allow(dead_code)]

use ctxlab::agent::{Stopping, StrategyConfig, ToolsetKind};
use ctxlab::evaluation::Scope;
use ctxlab::experiment::{
    eval, ingest, load_dataset, load_results, run, Dataset, EvalSummary, InstanceStatus,
    PolicySpec, RunConfig, RunOptions, RunSummary,
};
use ctxlab::Execution;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use tempfile::TempDir;

pub const TIMESTAMP: u64 = 1_700_000_000;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn minirepo() -> PathBuf {
    fixtures().join("minirepo")
}

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_AUTHOR_NAME", "fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.invalid")
        .env("GIT_COMMITTER_NAME", "fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.invalid")
        .env("GIT_AUTHOR_DATE", "2024-01-01T00:00:00Z")
        .env("GIT_COMMITTER_DATE", "2024-01-01T00:00:00Z")
        .output()
        .expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn copy_tree(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(from).unwrap();
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).unwrap();
        } else {
            std::fs::copy(entry.path(), &dest).unwrap();
        }
    }
}

/// Builds `repos/acme__inventory` with tags v1 and v2 (v2 = v1 plus the
/// overlay in `minirepo/v2`).
pub fn build_repos(root: &Path) -> PathBuf {
    let repos = root.join("repos");
    let repo = repos.join("acme__inventory");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q", "-b", "main"]);
    copy_tree(&minirepo().join("v1"), &repo);
    git(&repo, &["add", "-A"]);
    git(&repo, &["commit", "-q", "-m", "v1"]);
    git(&repo, &["tag", "v1"]);
    copy_tree(&minirepo().join("v2"), &repo);
    git(&repo, &["add", "-A"]);
    git(&repo, &["commit", "-q", "-m", "v2"]);
    git(&repo, &["tag", "v2"]);
    repos
}

pub struct Lab {
    pub dir: TempDir,
    pub repos: PathBuf,
    pub workspaces: PathBuf,
    pub dataset: Dataset,
}

impl Lab {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let repos = build_repos(dir.path());
        let workspaces = dir.path().join("workspaces");
        let dataset = load_dataset(&minirepo().join("dataset.jsonl")).unwrap();
        Lab {
            dir,
            repos,
            workspaces,
            dataset,
        }
    }

    pub fn ingested() -> Self {
        let lab = Lab::new();
        let report = ingest(
            &lab.dataset,
            &lab.repos,
            &lab.workspaces,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(report.unavailable(), 0, "{report:?}");
        lab
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn run(&self, config: &RunConfig, out: &Path) -> RunSummary {
        run(&self.dataset, config, &self.options(out)).unwrap()
    }

    pub fn options(&self, out: &Path) -> RunOptions {
        RunOptions {
            output_root: out.to_path_buf(),
            workspaces: self.workspaces.clone(),
            exec: Execution::parallel(),
            timestamp: TIMESTAMP,
            stop_after: None,
        }
    }

    pub fn eval(&self, runs: &[PathBuf], out: &Path) -> EvalSummary {
        eval(
            runs,
            &self.dataset,
            &self.workspaces,
            out,
            Execution::parallel(),
        )
        .unwrap()
    }
}

/// The seven valid (toolset, stopping) pairs; the baseline only exists for BM25.
pub fn configs() -> Vec<(ToolsetKind, Stopping)> {
    vec![
        (ToolsetKind::Bm25, Stopping::Baseline),
        (ToolsetKind::Bm25, Stopping::Cl),
        (ToolsetKind::Bm25, Stopping::Tc),
        (ToolsetKind::Bm25, Stopping::Sr),
        (ToolsetKind::Acr, Stopping::Cl),
        (ToolsetKind::Acr, Stopping::Tc),
        (ToolsetKind::Acr, Stopping::Sr),
    ]
}

pub fn run_config(toolset: ToolsetKind, stopping: Stopping) -> RunConfig {
    let traces = minirepo().join("traces").join(toolset.to_string());
    RunConfig::new(
        StrategyConfig::new(toolset, stopping),
        PolicySpec::Scripted(traces),
    )
}

/// Every file under `dir` as (relative path, bytes), sorted.
pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn expected_metrics() -> BTreeMap<String, BTreeMap<String, Value>> {
    let text = std::fs::read_to_string(minirepo().join("expected_metrics.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn close(a: f64, b: &Value) -> bool {
    (a - b.as_f64().unwrap()).abs() < 1e-12
}

/// Runs all seven configurations and compares stop reasons, steps, gathered
/// spans, token totals and per-instance P/R/F1 with the hand-scored file.
pub fn check_golden(lab: &Lab) -> Result<(), String> {
    let expected = expected_metrics();
    let out = lab.path("golden");
    let mut run_dirs = Vec::new();
    let mut failures = Vec::new();
    for (toolset, stopping) in configs() {
        let label = format!("{toolset}-{stopping}");
        let summary = lab.run(&run_config(toolset, stopping), &out.join("runs"));
        if summary.manifest.instances.failed > 0 {
            return Err(format!("{label}: {:?}", summary.failures));
        }
        let want = &expected[&label];
        for record in load_results(&summary.output_dir).map_err(|e| e.to_string())? {
            let w = &want[&record.instance_id];
            let spans: Vec<String> = record
                .context
                .items()
                .iter()
                .map(|i| format!("{}:{}", i.file, i.span))
                .collect();
            let stop = record.stop_reason.map(|s| serde_json::to_value(s).unwrap());
            let got = (
                record.status == InstanceStatus::Ok,
                stop.unwrap_or(Value::Null),
                record.transcript.len(),
                record.context.total_tokens(),
                spans,
            );
            let exp = (
                true,
                w["stop_reason"].clone(),
                w["steps"].as_u64().unwrap() as usize,
                w["context_tokens"].as_u64().unwrap() as usize,
                serde_json::from_value::<Vec<String>>(w["spans"].clone()).unwrap(),
            );
            if got != exp {
                failures.push(format!(
                    "{label}/{}: got {got:?}, want {exp:?}",
                    record.instance_id
                ));
            }
        }
        run_dirs.push(summary.output_dir);
    }

    let evaluation = lab.eval(&run_dirs, &out.join("eval"));
    for run in &evaluation.runs {
        let label = run.manifest.strategy.label();
        if run.metrics.len() != 6 {
            failures.push(format!("{label}: {} metric rows", run.metrics.len()));
        }
        for m in &run.metrics {
            let key = match m.scope {
                Scope::File => "file",
                Scope::Entity => "entity",
            };
            let inst = &expected[&label][&m.instance_id];
            let w = &inst[key];
            let ok = close(m.precision, &w[0]) && close(m.recall, &w[1]) && close(m.f1, &w[2]);
            if !ok || m.context_tokens as u64 != inst["context_tokens"].as_u64().unwrap() {
                failures.push(format!(
                    "{label}/{} {key}: got {m:?}, want {w}",
                    m.instance_id
                ));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("\n"))
    }
}

/// Two full run+eval passes into fresh directories produce identical bytes.
pub fn check_reruns_identical(lab: &Lab) -> Result<(), String> {
    let mut trees = Vec::new();
    for attempt in ["first", "second"] {
        let out = lab.path(attempt);
        let mut runs = Vec::new();
        for (toolset, stopping) in configs() {
            runs.push(
                lab.run(&run_config(toolset, stopping), &out.join("runs"))
                    .output_dir,
            );
        }
        lab.eval(&runs, &out.join("eval"));
        trees.push(tree_bytes(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    if a.len() != b.len() {
        return Err(format!("{} files vs {}", a.len(), b.len()));
    }
    for ((pa, ba), (pb, bb)) in a.iter().zip(b) {
        if pa != pb || ba != bb {
            return Err(format!("{pa} differs between runs"));
        }
    }
    Ok(())
}

//! Materializing repository checkouts and caching their entity indexes.

use super::{atomic_write, sha256_hex, Dataset, ExperimentError};
use crate::agent::RepoContext;
use crate::corpus::{load_snapshot, CodeIndex, ExtractorRegistry, SnapshotOptions};
use crate::exec::Execution;
use crate::retrieval::Bm25Params;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

/// Written into a workspace once extraction has finished.
pub const WORKSPACE_MARKER: &str = ".ctxlab-commit";
const INDEX_CACHE_VERSION: u32 = 1;

/// Content-addressed location of the checkout of `repo` at `commit`.
pub fn workspace_dir(workspaces: &Path, repo: &str, commit: &str) -> PathBuf {
    let key = sha256_hex(format!("{repo}\n{commit}").as_bytes());
    workspaces.join(&key[..20])
}

pub fn is_materialized(dir: &Path) -> bool {
    dir.join(WORKSPACE_MARKER).is_file()
}

/// Finds the clone of `repo` under `repos_dir`. `owner/name` is looked up as
/// `owner__name`, `owner/name` and `name`, each with or without a `.git`
/// suffix.
pub fn find_clone(repos_dir: &Path, repo: &str) -> Option<PathBuf> {
    let flat = repo.replace('/', "__");
    let short = repo.rsplit('/').next().unwrap_or(repo);
    [flat.as_str(), repo, short]
        .iter()
        .flat_map(|name| [repos_dir.join(name), repos_dir.join(format!("{name}.git"))])
        .find(|p| p.is_dir())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum IngestStatus {
    Materialized,
    AlreadyPresent,
    Unavailable(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Status per instance in dataset order.
    pub instances: Vec<(String, IngestStatus)>,
    /// Checkouts created by this call.
    pub created: usize,
}

impl IngestReport {
    pub fn count(&self, pred: impl Fn(&IngestStatus) -> bool) -> usize {
        self.instances.iter().filter(|(_, s)| pred(s)).count()
    }

    pub fn unavailable(&self) -> usize {
        self.count(|s| matches!(s, IngestStatus::Unavailable(_)))
    }
}

/// Exports every instance's base commit with `git archive` into its
/// content-addressed workspace. Existing workspaces are left untouched and
/// instances whose clone or commit cannot be found are reported unavailable.
pub fn ingest(
    dataset: &Dataset,
    repos_dir: &Path,
    workspaces: &Path,
    exec: Execution,
) -> Result<IngestReport, ExperimentError> {
    std::fs::create_dir_all(workspaces).map_err(|e| ExperimentError::io(workspaces, e))?;
    // Instances sharing a checkout are materialized once.
    let mut keys: BTreeMap<PathBuf, (String, String)> = BTreeMap::new();
    for inst in &dataset.instances {
        keys.entry(workspace_dir(workspaces, &inst.repo, &inst.base_commit))
            .or_insert_with(|| (inst.repo.clone(), inst.base_commit.clone()));
    }
    let jobs: Vec<(PathBuf, (String, String))> = keys.into_iter().collect();
    let outcomes = exec.map(&jobs, |(dir, (repo, commit))| {
        if is_materialized(dir) {
            return IngestStatus::AlreadyPresent;
        }
        let Some(clone) = find_clone(repos_dir, repo) else {
            return IngestStatus::Unavailable(format!(
                "no clone of {repo} under {}",
                repos_dir.display()
            ));
        };
        match materialize(&clone, commit, dir) {
            Ok(()) => IngestStatus::Materialized,
            Err(reason) => IngestStatus::Unavailable(reason),
        }
    });
    let by_dir: BTreeMap<&PathBuf, &IngestStatus> =
        jobs.iter().map(|(d, _)| d).zip(&outcomes).collect();
    let mut report = IngestReport {
        created: outcomes
            .iter()
            .filter(|s| **s == IngestStatus::Materialized)
            .count(),
        ..IngestReport::default()
    };
    let mut claimed = std::collections::HashSet::new();
    for inst in &dataset.instances {
        let dir = workspace_dir(workspaces, &inst.repo, &inst.base_commit);
        let status = match by_dir[&dir] {
            IngestStatus::Materialized if !claimed.insert(dir.clone()) => {
                IngestStatus::AlreadyPresent
            }
            other => other.clone(),
        };
        report.instances.push((inst.instance_id.clone(), status));
    }
    Ok(report)
}

fn git(clone: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(clone);
    cmd
}

fn materialize(clone: &Path, commit: &str, dest: &Path) -> Result<(), String> {
    let resolved = git(clone)
        .args(["rev-parse", "--verify", "--quiet"])
        .arg(format!("{commit}^{{commit}}"))
        .stderr(Stdio::null())
        .output()
        .map_err(|e| format!("cannot run git: {e}"))?;
    if !resolved.status.success() {
        return Err(format!("commit {commit} not found in {}", clone.display()));
    }
    let sha = String::from_utf8_lossy(&resolved.stdout).trim().to_string();

    let parent = dest.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::Builder::new()
        .prefix(".ingest-")
        .tempdir_in(parent)
        .map_err(|e| format!("cannot create temporary directory: {e}"))?;
    let mut child = git(clone)
        .args(["archive", "--format=tar", &sha])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot run git: {e}"))?;
    let stdout = child.stdout.take().expect("piped stdout");
    let unpacked = tar::Archive::new(stdout).unpack(tmp.path());
    let output = child
        .wait_with_output()
        .map_err(|e| format!("git archive failed: {e}"))?;
    if !output.status.success() {
        return Err(format!(
            "git archive failed: {}",
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    unpacked.map_err(|e| format!("cannot unpack archive: {e}"))?;
    std::fs::write(tmp.path().join(WORKSPACE_MARKER), format!("{sha}\n"))
        .map_err(|e| format!("cannot write marker: {e}"))?;
    let tmp = tmp.keep();
    if let Err(e) = std::fs::rename(&tmp, dest) {
        let _ = std::fs::remove_dir_all(&tmp);
        if !is_materialized(dest) {
            return Err(format!("cannot move checkout into place: {e}"));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct IndexCache {
    version: u32,
    snapshot_hash: String,
    code_index: CodeIndex,
}

/// Sibling file holding the cached entity index of a workspace.
pub fn index_cache_path(workspace: &Path) -> PathBuf {
    let mut name = workspace.file_name().unwrap_or_default().to_os_string();
    name.push(".index.json");
    workspace.with_file_name(name)
}

/// Loads a workspace snapshot and its entity index, reusing the cached index
/// when the snapshot content is unchanged and refreshing it otherwise.
pub fn load_repo_context(
    workspace: &Path,
    window: usize,
    params: Bm25Params,
    exec: Execution,
) -> Result<RepoContext, ExperimentError> {
    if !is_materialized(workspace) {
        return Err(ExperimentError::Unavailable(workspace.to_path_buf()));
    }
    let snapshot = load_snapshot(workspace, &SnapshotOptions::default(), exec)
        .map_err(|e| ExperimentError::Corpus(e.to_string()))?;
    let hash = snapshot.content_hash();
    let cache_path = index_cache_path(workspace);
    let cached = std::fs::read(&cache_path)
        .ok()
        .and_then(|b| serde_json::from_slice::<IndexCache>(&b).ok())
        .filter(|c| c.version == INDEX_CACHE_VERSION && c.snapshot_hash == hash);
    let code_index = match cached {
        Some(cache) => cache.code_index,
        None => {
            let code_index = CodeIndex::build(&snapshot, &ExtractorRegistry::default(), exec);
            let cache = IndexCache {
                version: INDEX_CACHE_VERSION,
                snapshot_hash: hash,
                code_index,
            };
            let json = serde_json::to_vec(&cache).expect("index serializes");
            if let Err(e) = atomic_write(&cache_path, &json) {
                log::warn!("cannot write index cache: {e}");
            }
            cache.code_index
        }
    };
    Ok(RepoContext::from_index(
        snapshot, code_index, window, params, exec,
    ))
}

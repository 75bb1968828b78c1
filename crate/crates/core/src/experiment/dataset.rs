use super::{sha256_hex, ExperimentError};
use crate::evaluation::{parse_patch, GoldPatch};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// One editing task: a repository state, a request and the reference patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub repo: String,
    pub base_commit: String,
    pub problem_statement: String,
    pub gold_patch: String,
}

impl TaskInstance {
    pub fn parsed_patch(&self) -> GoldPatch {
        parse_patch(&self.gold_patch).expect("validated when the dataset was loaded")
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub sha256: String,
    pub instances: Vec<TaskInstance>,
}

impl Dataset {
    /// File stem, used to label result rows.
    pub fn name(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    }
}

/// Reads a JSONL dataset. Blank lines are skipped; unknown fields are ignored.
pub fn load_dataset(path: &Path) -> Result<Dataset, ExperimentError> {
    let bytes = std::fs::read(path).map_err(|e| ExperimentError::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| ExperimentError::Dataset {
        path: path.to_path_buf(),
        line: 0,
        message: "file is not valid UTF-8".into(),
    })?;
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| ExperimentError::Dataset {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let instance: TaskInstance =
            serde_json::from_str(line).map_err(|e| fail(format!("malformed record: {e}")))?;
        if !seen.insert(instance.instance_id.clone()) {
            return Err(fail(format!(
                "duplicate instance_id {:?}",
                instance.instance_id
            )));
        }
        parse_patch(&instance.gold_patch).map_err(|e| fail(format!("gold_patch: {e}")))?;
        instances.push(instance);
    }
    Ok(Dataset {
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
        instances,
    })
}

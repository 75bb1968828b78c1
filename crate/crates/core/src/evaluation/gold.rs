//! Ground-truth and retrieved localizations at file and entity scope.

use super::patch::GoldPatch;
use crate::agent::ContextSet;
use crate::corpus::{CodeIndex, LineSpan, RepoSnapshot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub file: String,
    pub qualified_name: String,
}

impl EntityRef {
    pub fn new(file: impl Into<String>, qualified_name: impl Into<String>) -> Self {
        EntityRef {
            file: file.into(),
            qualified_name: qualified_name.into(),
        }
    }
}

impl std::fmt::Display for EntityRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}::{}", self.file, self.qualified_name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityGold {
    pub entities: BTreeSet<EntityRef>,
    /// Pre-image files the snapshot does not contain; skipped at entity scope.
    pub missing_files: Vec<String>,
    /// Deleted lines and pure-insertion points that fall outside every entity.
    pub module_level_changes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLocalization {
    pub files: BTreeSet<String>,
    pub entities: BTreeSet<EntityRef>,
    pub missing_files: Vec<String>,
    pub module_level_changes: usize,
}

impl GoldLocalization {
    pub fn from_patch(patch: &GoldPatch, snapshot: &RepoSnapshot, index: &CodeIndex) -> Self {
        let EntityGold {
            entities,
            missing_files,
            module_level_changes,
        } = gold_entities(patch, snapshot, index);
        GoldLocalization {
            files: gold_files(patch),
            entities,
            missing_files,
            module_level_changes,
        }
    }
}

/// Pre-image path of every touched file; additions contribute their new path.
pub fn gold_files(patch: &GoldPatch) -> BTreeSet<String> {
    patch
        .file_changes
        .iter()
        .map(|c| c.primary_path().to_string())
        .collect()
}

/// An entity is affected when a deleted or modified pre-image line lies in its
/// span, or when a pure insertion follows pre-image line `p` with
/// `start <= p < end`, i.e. lands strictly between two of its lines.
pub fn gold_entities(patch: &GoldPatch, snapshot: &RepoSnapshot, index: &CodeIndex) -> EntityGold {
    let mut gold = EntityGold::default();
    for change in &patch.file_changes {
        let Some(path) = change.path_before.as_deref() else {
            continue;
        };
        if snapshot.file(path).is_none() {
            gold.missing_files.push(path.to_string());
            continue;
        }
        let entities = index.in_file(path);
        let mut mark = |hit: &dyn Fn(&LineSpan) -> bool| {
            let mut any = false;
            for e in entities.iter().filter(|e| hit(&e.span)) {
                any = true;
                gold.entities
                    .insert(EntityRef::new(path, &e.qualified_name));
            }
            if !any {
                gold.module_level_changes += 1;
            }
        };
        for line in change.deleted_lines() {
            mark(&|span: &LineSpan| span.contains_line(line));
        }
        for anchor in change.insertion_anchors() {
            mark(&|span: &LineSpan| span.start <= anchor && anchor < span.end);
        }
    }
    gold
}

pub fn retrieved_files(context: &ContextSet) -> BTreeSet<String> {
    context.items().iter().map(|i| i.file.clone()).collect()
}

/// Entities overlapping any retrieved span of the same file by at least one line.
pub fn retrieved_entities(context: &ContextSet, index: &CodeIndex) -> BTreeSet<EntityRef> {
    context
        .items()
        .iter()
        .flat_map(|item| {
            index
                .overlapping(&item.file, &item.span)
                .map(|e| EntityRef::new(&e.file, &e.qualified_name))
                .collect::<Vec<_>>()
        })
        .collect()
}

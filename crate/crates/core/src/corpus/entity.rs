use super::{LineSpan, RepoSnapshot, SourceFile};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Class,
    Function,
    Method,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Class => "class",
            EntityKind::Function => "function",
            EntityKind::Method => "method",
        })
    }
}

/// A named definition with the lines it occupies, decorators included.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CodeEntity {
    pub kind: EntityKind,
    /// Dotted path through enclosing definitions, e.g. `Outer.Inner.method`.
    pub qualified_name: String,
    pub file: String,
    pub span: LineSpan,
}

impl CodeEntity {
    pub fn simple_name(&self) -> &str {
        self.qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&self.qualified_name)
    }

    /// Qualified name of the enclosing definition, if nested.
    pub fn parent_name(&self) -> Option<&str> {
        self.qualified_name
            .rsplit_once('.')
            .map(|(parent, _)| parent)
    }
}

/// Result of running an extractor over one file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub entities: Vec<CodeEntity>,
    /// Set when the file could not be parsed; `entities` is then empty.
    pub parse_error: Option<String>,
}

impl Extraction {
    pub fn failed(message: impl Into<String>) -> Self {
        Extraction {
            entities: Vec::new(),
            parse_error: Some(message.into()),
        }
    }
}

pub trait EntityExtractor: Send + Sync {
    fn extract(&self, file: &SourceFile) -> Extraction;
}

/// Maps file extensions to extractors. Files with no registered extractor
/// yield no entities but still take part in file-level retrieval.
#[derive(Clone)]
pub struct ExtractorRegistry {
    by_extension: HashMap<String, Arc<dyn EntityExtractor>>,
}

impl Default for ExtractorRegistry {
    fn default() -> Self {
        let mut registry = ExtractorRegistry::empty();
        registry.register("py", Arc::new(super::PythonExtractor));
        registry
    }
}

impl fmt::Debug for ExtractorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut exts: Vec<_> = self.by_extension.keys().collect();
        exts.sort();
        f.debug_struct("ExtractorRegistry")
            .field("extensions", &exts)
            .finish()
    }
}

impl ExtractorRegistry {
    pub fn empty() -> Self {
        ExtractorRegistry {
            by_extension: HashMap::new(),
        }
    }

    pub fn register(&mut self, extension: &str, extractor: Arc<dyn EntityExtractor>) {
        self.by_extension
            .insert(extension.trim_start_matches('.').to_string(), extractor);
    }

    pub fn for_path(&self, path: &str) -> Option<&dyn EntityExtractor> {
        let name = path.rsplit('/').next().unwrap_or(path);
        let (_, ext) = name.rsplit_once('.')?;
        self.by_extension.get(ext).map(|e| e.as_ref())
    }

    pub fn extract(&self, file: &SourceFile) -> Extraction {
        match self.for_path(&file.path) {
            Some(extractor) => extractor.extract(file),
            None => Extraction::default(),
        }
    }
}

/// All entities of a snapshot, grouped per file in snapshot order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeIndex {
    entities: Vec<CodeEntity>,
    ranges: BTreeMap<String, (usize, usize)>,
    parse_failures: BTreeMap<String, String>,
}

impl CodeIndex {
    pub fn build(snapshot: &RepoSnapshot, registry: &ExtractorRegistry, exec: Execution) -> Self {
        let extractions = exec.map(snapshot.files(), |file| registry.extract(file));
        let mut index = CodeIndex::default();
        for (file, extraction) in snapshot.files().iter().zip(extractions) {
            if let Some(err) = extraction.parse_error {
                index.parse_failures.insert(file.path.clone(), err);
            }
            let start = index.entities.len();
            index.entities.extend(extraction.entities);
            if index.entities.len() > start {
                index
                    .ranges
                    .insert(file.path.clone(), (start, index.entities.len()));
            }
        }
        index
    }

    /// Builds an index from an explicit entity list (used by fixtures).
    pub fn from_entities(mut entities: Vec<CodeEntity>) -> Self {
        entities.sort_by(|a, b| {
            (a.file.as_str(), a.span.start, std::cmp::Reverse(a.span.end)).cmp(&(
                b.file.as_str(),
                b.span.start,
                std::cmp::Reverse(b.span.end),
            ))
        });
        let mut ranges = BTreeMap::new();
        let mut i = 0;
        while i < entities.len() {
            let file = entities[i].file.clone();
            let start = i;
            while i < entities.len() && entities[i].file == file {
                i += 1;
            }
            ranges.insert(file, (start, i));
        }
        CodeIndex {
            entities,
            ranges,
            parse_failures: BTreeMap::new(),
        }
    }

    pub fn entities(&self) -> &[CodeEntity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities of one file ordered by span start.
    pub fn in_file(&self, path: &str) -> &[CodeEntity] {
        match self.ranges.get(path) {
            Some(&(start, end)) => &self.entities[Range { start, end }],
            None => &[],
        }
    }

    pub fn parse_failures(&self) -> &BTreeMap<String, String> {
        &self.parse_failures
    }

    /// Smallest entity whose span contains `span`.
    pub fn innermost_containing(&self, path: &str, span: &LineSpan) -> Option<&CodeEntity> {
        self.in_file(path)
            .iter()
            .filter(|e| e.span.contains(span))
            .min_by_key(|e| e.span.len())
    }

    pub fn overlapping<'a>(
        &'a self,
        path: &str,
        span: &'a LineSpan,
    ) -> impl Iterator<Item = &'a CodeEntity> + 'a {
        self.in_file(path)
            .iter()
            .filter(move |e| e.span.overlaps(span))
    }
}

//! Structure-aware search over extracted entities, in the style of
//! AutoCodeRover's toolset.

use super::{RetrievalError, SearchHit};
use crate::corpus::{CodeEntity, CodeIndex, EntityKind, LineSpan, RepoSnapshot, SourceFile};

pub const DEFAULT_RESULT_LIMIT: usize = 10;

/// Hits returned by one tool invocation, capped at the tool's limit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToolOutcome {
    pub hits: Vec<SearchHit>,
    /// Matches found before truncation.
    pub total_matches: usize,
}

impl ToolOutcome {
    pub fn truncated(&self) -> bool {
        self.total_matches > self.hits.len()
    }

    fn capped(mut hits: Vec<SearchHit>, limit: usize) -> Self {
        hits.sort_by(|a, b| {
            (a.file.as_str(), a.span.start, std::cmp::Reverse(a.span.end)).cmp(&(
                b.file.as_str(),
                b.span.start,
                std::cmp::Reverse(b.span.end),
            ))
        });
        hits.dedup_by(|a, b| a.file == b.file && a.span == b.span);
        let total_matches = hits.len();
        hits.truncate(limit);
        ToolOutcome {
            hits,
            total_matches,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StructureSearch<'a> {
    snapshot: &'a RepoSnapshot,
    index: &'a CodeIndex,
    limit: usize,
}

impl<'a> StructureSearch<'a> {
    pub fn new(snapshot: &'a RepoSnapshot, index: &'a CodeIndex) -> Self {
        StructureSearch {
            snapshot,
            index,
            limit: DEFAULT_RESULT_LIMIT,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit.max(1);
        self
    }

    fn entity_hit(&self, entity: &CodeEntity, tool: &str) -> Option<SearchHit> {
        let file = self.snapshot.file(&entity.file)?;
        Some(hit(file, entity.span, tool))
    }

    fn entity_hits<F>(&self, tool: &str, pred: F) -> ToolOutcome
    where
        F: Fn(&CodeEntity) -> bool,
    {
        let hits = self
            .index
            .entities()
            .iter()
            .filter(|e| pred(e))
            .filter_map(|e| self.entity_hit(e, tool))
            .collect();
        ToolOutcome::capped(hits, self.limit)
    }

    /// Classes whose simple name is exactly `name`.
    pub fn search_class(&self, name: &str) -> ToolOutcome {
        self.entity_hits("search_class", |e| {
            e.kind == EntityKind::Class && e.simple_name() == name
        })
    }

    /// Functions and methods whose simple name is exactly `name`.
    pub fn search_method(&self, name: &str) -> ToolOutcome {
        self.entity_hits("search_method", |e| {
            e.kind != EntityKind::Class && e.simple_name() == name
        })
    }

    pub fn search_method_in_class(&self, class_name: &str, method_name: &str) -> ToolOutcome {
        self.entity_hits("search_method_in_class", |e| {
            e.kind == EntityKind::Method
                && e.simple_name() == method_name
                && e.parent_name()
                    .is_some_and(|p| p.rsplit('.').next() == Some(class_name))
        })
    }

    /// Every occurrence of `fragment`, widened to the innermost enclosing entity.
    pub fn search_code(&self, fragment: &str) -> Result<ToolOutcome, RetrievalError> {
        if fragment.is_empty() {
            return Err(RetrievalError::EmptyFragment);
        }
        let hits = self
            .snapshot
            .files()
            .iter()
            .flat_map(|f| self.fragment_hits(f, fragment, "search_code"))
            .collect();
        Ok(ToolOutcome::capped(hits, self.limit))
    }

    pub fn search_code_in_file(
        &self,
        fragment: &str,
        path: &str,
    ) -> Result<ToolOutcome, RetrievalError> {
        if fragment.is_empty() {
            return Err(RetrievalError::EmptyFragment);
        }
        let file = self
            .snapshot
            .file(path)
            .ok_or_else(|| RetrievalError::UnknownFile(path.to_string()))?;
        let hits = self.fragment_hits(file, fragment, "search_code_in_file");
        Ok(ToolOutcome::capped(hits, self.limit))
    }

    fn fragment_hits(&self, file: &SourceFile, fragment: &str, tool: &str) -> Vec<SearchHit> {
        let content = &file.content;
        let line_of = |offset: usize| content[..offset].matches('\n').count() + 1;
        let mut hits = Vec::new();
        let mut from = 0;
        while let Some(pos) = content[from..].find(fragment) {
            let start = from + pos;
            let end = start + fragment.len();
            let last_byte = end - 1;
            let span = LineSpan::new(line_of(start), line_of(last_byte));
            let span = self
                .index
                .innermost_containing(&file.path, &span)
                .map_or(span, |e| e.span);
            hits.push(hit(file, span, tool));
            // advance by one character so overlapping occurrences are found
            let step = content[start..].chars().next().map_or(1, char::len_utf8);
            from = start + step;
        }
        hits
    }
}

fn hit(file: &SourceFile, span: LineSpan, tool: &str) -> SearchHit {
    SearchHit {
        file: file.path.clone(),
        span,
        snippet: file.text(span).to_string(),
        score: None,
        provenance: tool.to_string(),
    }
}

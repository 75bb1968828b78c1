use crate::corpus::{CodeIndex, LineSpan, RepoSnapshot};
use serde::{Deserialize, Serialize};

pub const DEFAULT_WINDOW: usize = 40;

/// A retrieval unit: either a whole entity or a window of uncovered lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub file: String,
    pub span: LineSpan,
    pub text: String,
}

impl Document {
    pub fn new(file: &str, span: LineSpan, text: &str) -> Self {
        Document {
            doc_id: format!("{file}:{span}"),
            file: file.to_string(),
            span,
            text: text.to_string(),
        }
    }
}

/// One document per entity, plus `window`-line chunks over every run of lines
/// no entity covers. Ordered by file, then span start (longer span first).
pub fn build_chunks(snapshot: &RepoSnapshot, index: &CodeIndex, window: usize) -> Vec<Document> {
    assert!(window >= 1, "chunk window must be at least one line");
    let mut docs = Vec::new();
    for file in snapshot.files() {
        let line_count = file.line_count();
        if line_count == 0 {
            continue;
        }
        let entities = index.in_file(&file.path);
        let mut covered = vec![false; line_count + 1];
        let mut file_docs = Vec::new();
        for e in entities {
            let end = e.span.end.min(line_count);
            if e.span.start > end {
                continue;
            }
            covered[e.span.start..=end]
                .iter_mut()
                .for_each(|c| *c = true);
            let span = LineSpan::new(e.span.start, end);
            file_docs.push(Document::new(&file.path, span, file.text(span)));
        }
        let mut line = 1;
        while line <= line_count {
            if covered[line] {
                line += 1;
                continue;
            }
            let region_start = line;
            while line <= line_count && !covered[line] {
                line += 1;
            }
            let region_end = line - 1;
            let mut s = region_start;
            while s <= region_end {
                let e = (s + window - 1).min(region_end);
                let span = LineSpan::new(s, e);
                file_docs.push(Document::new(&file.path, span, file.text(span)));
                s = e + 1;
            }
        }
        file_docs.sort_by_key(|d| (d.span.start, std::cmp::Reverse(d.span.end)));
        file_docs.dedup_by(|a, b| a.span == b.span);
        docs.extend(file_docs);
    }
    docs
}

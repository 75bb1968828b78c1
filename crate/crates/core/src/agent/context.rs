use crate::corpus::{LineSpan, TokenCounter};
use crate::retrieval::SearchHit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub file: String,
    pub span: LineSpan,
    pub content: String,
    /// Comma-separated, sorted names of the tools that contributed lines.
    pub source_tool: String,
    pub token_count: usize,
}

/// Gathered context: non-overlapping spans per file, ordered by file and start.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSet {
    items: Vec<ContextItem>,
    total_tokens: usize,
}

impl ContextSet {
    pub fn new() -> Self {
        ContextSet::default()
    }

    pub fn items(&self) -> &[ContextItem] {
        &self.items
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn add_hits(&mut self, hits: &[SearchHit], counter: &TokenCounter) {
        for hit in hits {
            self.add_hit(hit, counter);
        }
    }

    /// Inserts one hit, merging it with every overlapping item of the same file.
    pub fn add_hit(&mut self, hit: &SearchHit, counter: &TokenCounter) {
        let (overlapping, rest): (Vec<ContextItem>, Vec<ContextItem>) =
            std::mem::take(&mut self.items)
                .into_iter()
                .partition(|item| item.file == hit.file && item.span.overlaps(&hit.span));
        self.items = rest;

        let mut span = hit.span;
        let mut lines: BTreeMap<usize, &str> = BTreeMap::new();
        let mut tools: Vec<&str> = vec![hit.provenance.as_str()];
        for item in &overlapping {
            span = span.union(&item.span);
            tools.extend(item.source_tool.split(','));
            for (i, line) in item.content.split_inclusive('\n').enumerate() {
                lines.insert(item.span.start + i, line);
            }
        }
        // the new hit is the freshest view of its lines
        for (i, line) in hit.snippet.split_inclusive('\n').enumerate() {
            lines.insert(hit.span.start + i, line);
        }
        let content: String = lines
            .range(span.start..=span.end)
            .map(|(_, l)| *l)
            .collect();
        tools.sort_unstable();
        tools.dedup();

        let item = ContextItem {
            file: hit.file.clone(),
            span,
            token_count: counter.count(&content),
            content,
            source_tool: tools.join(","),
        };
        let pos = self.items.partition_point(|i| {
            (i.file.as_str(), i.span.start) < (item.file.as_str(), item.span.start)
        });
        self.items.insert(pos, item);
        self.total_tokens = self.items.iter().map(|i| i.token_count).sum();
    }

    /// One line per item, used in reflection prompts.
    pub fn summary(&self) -> String {
        if self.items.is_empty() {
            return "(no context gathered yet)".to_string();
        }
        self.items
            .iter()
            .map(|i| format!("- {}:{} ({} tokens)", i.file, i.span, i.token_count))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn add_to_context(context: &mut ContextSet, hits: &[SearchHit], counter: &TokenCounter) {
    context.add_hits(hits, counter);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file_lines(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("line {i}\n")).collect()
    }

    fn hit(file: &str, start: usize, end: usize) -> SearchHit {
        let lines = file_lines(end);
        SearchHit {
            file: file.to_string(),
            span: LineSpan::new(start, end),
            snippet: lines[start - 1..end].concat(),
            score: None,
            provenance: "search_code".to_string(),
        }
    }

    #[test]
    fn idempotent_insert() {
        let c = TokenCounter::approximate();
        let mut ctx = ContextSet::new();
        ctx.add_hit(&hit("a.py", 3, 5), &c);
        let before = ctx.clone();
        ctx.add_hit(&hit("a.py", 3, 5), &c);
        assert_eq!(ctx, before);
        assert_eq!(ctx.len(), 1);
    }

    #[test]
    fn overlapping_spans_merge() {
        let c = TokenCounter::approximate();
        let mut ctx = ContextSet::new();
        ctx.add_hit(&hit("a.py", 1, 10), &c);
        ctx.add_hit(&hit("a.py", 5, 20), &c);
        assert_eq!(ctx.len(), 1);
        let item = &ctx.items()[0];
        assert_eq!(item.span, LineSpan::new(1, 20));
        assert_eq!(item.content, file_lines(20).concat());
        assert_eq!(item.token_count, c.count(&item.content));
    }

    #[test]
    fn different_files_do_not_merge() {
        let c = TokenCounter::approximate();
        let mut ctx = ContextSet::new();
        ctx.add_hit(&hit("b.py", 1, 3), &c);
        ctx.add_hit(&hit("a.py", 1, 3), &c);
        assert_eq!(ctx.len(), 2);
        assert_eq!(ctx.items()[0].file, "a.py");
    }

    #[test]
    fn adjacent_spans_stay_separate() {
        let c = TokenCounter::approximate();
        let mut ctx = ContextSet::new();
        ctx.add_hit(&hit("a.py", 1, 4), &c);
        ctx.add_hit(&hit("a.py", 5, 8), &c);
        assert_eq!(ctx.len(), 2);
    }

    #[test]
    fn bridging_hit_merges_all() {
        let c = TokenCounter::approximate();
        let mut ctx = ContextSet::new();
        ctx.add_hit(&hit("a.py", 1, 3), &c);
        ctx.add_hit(&hit("a.py", 8, 9), &c);
        let mut bridge = hit("a.py", 2, 8);
        bridge.provenance = "search_bm25".into();
        ctx.add_hit(&bridge, &c);
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx.items()[0].span, LineSpan::new(1, 9));
        assert_eq!(ctx.items()[0].source_tool, "search_bm25,search_code");
    }

    fn arb_hits() -> impl Strategy<Value = Vec<(u8, usize, usize)>> {
        proptest::collection::vec((0u8..3, 1usize..30, 0usize..8), 0..25)
    }

    proptest! {
        #[test]
        fn invariants_hold(raw in arb_hits()) {
            let c = TokenCounter::approximate();
            let mut ctx = ContextSet::new();
            for (f, start, len) in raw {
                let file = format!("f{f}.py");
                let before = ctx.clone();
                let absorbed = before.items().iter()
                    .filter(|i| i.file == file && i.span.overlaps(&LineSpan::new(start, start + len)))
                    .count();
                ctx.add_hit(&hit(&file, start, start + len), &c);

                for w in ctx.items().windows(2) {
                    if w[0].file == w[1].file {
                        prop_assert!(w[0].span.end < w[1].span.start);
                    }
                }
                for item in ctx.items() {
                    prop_assert_eq!(item.token_count, c.count(&item.content));
                    let expected: String = file_lines(item.span.end)[item.span.start - 1..].concat();
                    prop_assert_eq!(&item.content, &expected);
                }
                prop_assert_eq!(ctx.total_tokens(), ctx.items().iter().map(|i| i.token_count).sum::<usize>());
                // Growth is monotone unless one hit bridges several items, where
                // per-item rounding can give back at most one token per extra item.
                let slack = absorbed.saturating_sub(1);
                prop_assert!(ctx.total_tokens() + slack >= before.total_tokens());
                if absorbed <= 1 {
                    prop_assert!(ctx.total_tokens() >= before.total_tokens());
                }
            }
        }
    }
}

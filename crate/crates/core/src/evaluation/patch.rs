//! Unified diff parsing and rendering.
//!
//! Accepts plain `---`/`+++` diffs as well as `git diff` output with extended
//! headers (renames, copies, new and deleted files, mode changes, binary
//! markers). Hunk bodies are validated against the line counts in their
//! headers.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::LazyLock;

static HUNK_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$").expect("valid regex")
});

const DEV_NULL: &str = "/dev/null";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "text", rename_all = "snake_case")]
pub enum LineOp {
    Context(String),
    Delete(String),
    Insert(String),
    /// `\ No newline at end of file`, attached to the preceding line.
    NoNewline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub pre_start: usize,
    pub pre_len: usize,
    pub post_start: usize,
    pub post_len: usize,
    /// Text after the closing `@@`, usually a function signature.
    pub section: String,
    pub line_ops: Vec<LineOp>,
}

impl Hunk {
    pub fn header(&self) -> String {
        format!(
            "@@ -{},{} +{},{} @@{}",
            self.pre_start, self.pre_len, self.post_start, self.post_len, self.section
        )
    }

    /// Pre-image line numbers of deleted (or modified) lines.
    pub fn deleted_lines(&self) -> Vec<usize> {
        self.walk().0
    }

    /// For each block of inserted lines with no deletion next to it, the
    /// pre-image line it follows (0 means the top of the file). Insertions
    /// adjacent to deletions replace those lines and get no anchor.
    pub fn insertion_anchors(&self) -> Vec<usize> {
        self.walk().1
    }

    fn walk(&self) -> (Vec<usize>, Vec<usize>) {
        // With an empty pre-image range the start names the line before it.
        let mut line = if self.pre_len == 0 {
            self.pre_start + 1
        } else {
            self.pre_start
        };
        let mut deleted = Vec::new();
        let mut anchors = Vec::new();
        // Current run of consecutive -/+ lines: (line before it, saw delete, saw insert).
        let mut block: Option<(usize, bool, bool)> = None;
        let close = |block: &mut Option<(usize, bool, bool)>, anchors: &mut Vec<usize>| {
            if let Some((before, false, true)) = block.take() {
                anchors.push(before);
            }
        };
        for op in &self.line_ops {
            match op {
                LineOp::Context(_) => {
                    close(&mut block, &mut anchors);
                    line += 1;
                }
                LineOp::Delete(_) => {
                    block.get_or_insert((line - 1, false, false)).1 = true;
                    deleted.push(line);
                    line += 1;
                }
                LineOp::Insert(_) => {
                    block.get_or_insert((line - 1, false, false)).2 = true;
                }
                LineOp::NoNewline => {}
            }
        }
        close(&mut block, &mut anchors);
        (deleted, anchors)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    /// `None` for an added file.
    pub path_before: Option<String>,
    /// `None` for a deleted file.
    pub path_after: Option<String>,
    pub hunks: Vec<Hunk>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub binary: bool,
}

impl FileChange {
    pub fn is_addition(&self) -> bool {
        self.path_before.is_none()
    }

    pub fn is_deletion(&self) -> bool {
        self.path_after.is_none()
    }

    pub fn is_rename(&self) -> bool {
        matches!((&self.path_before, &self.path_after), (Some(a), Some(b)) if a != b)
    }

    pub fn deleted_lines(&self) -> Vec<usize> {
        self.hunks.iter().flat_map(Hunk::deleted_lines).collect()
    }

    pub fn insertion_anchors(&self) -> Vec<usize> {
        self.hunks
            .iter()
            .flat_map(Hunk::insertion_anchors)
            .collect()
    }

    /// Pre-image path, or the post-image path for additions.
    pub fn primary_path(&self) -> &str {
        self.path_before
            .as_deref()
            .or(self.path_after.as_deref())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPatch {
    pub raw: String,
    pub file_changes: Vec<FileChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}: {text:?}")]
pub struct PatchError {
    /// 1-based line number in the diff text.
    pub line: usize,
    pub message: String,
    pub text: String,
}

#[derive(Default)]
struct Pending {
    change: FileChange,
    git: bool,
    new_file: bool,
    deleted_file: bool,
    saw_file_lines: bool,
}

impl Pending {
    fn finish(mut self) -> FileChange {
        if self.new_file {
            self.change.path_before = None;
        }
        if self.deleted_file {
            self.change.path_after = None;
        }
        self.change
    }
}

pub fn parse_patch(diff_text: &str) -> Result<GoldPatch, PatchError> {
    let mut lines: Vec<&str> = diff_text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    let err = |i: usize, message: &str| PatchError {
        line: i + 1,
        message: message.to_string(),
        text: lines[i].to_string(),
    };

    let mut changes = Vec::new();
    let mut current: Option<Pending> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(rest) = line.strip_prefix("diff --git ") {
            changes.extend(current.take().map(Pending::finish));
            let (before, after) = split_git_paths(rest);
            current = Some(Pending {
                change: FileChange {
                    path_before: before,
                    path_after: after,
                    ..FileChange::default()
                },
                git: true,
                ..Pending::default()
            });
            i += 1;
            continue;
        }
        if line.starts_with("--- ") && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ ")) {
            let attach = current
                .as_ref()
                .is_some_and(|p| p.git && !p.saw_file_lines && p.change.hunks.is_empty());
            if !attach {
                changes.extend(current.take().map(Pending::finish));
                current = Some(Pending::default());
            }
            let pending = current.as_mut().expect("pending change");
            pending.saw_file_lines = true;
            pending.change.path_before = header_path(&line[4..], "a/");
            pending.change.path_after = header_path(&lines[i + 1][4..], "b/");
            i += 2;
            continue;
        }
        if line.starts_with("@@") {
            let Some(pending) = current.as_mut() else {
                return Err(err(i, "hunk outside of a file change"));
            };
            let caps = HUNK_RE
                .captures(line)
                .ok_or_else(|| err(i, "malformed hunk header"))?;
            let num = |k: usize| -> Result<usize, PatchError> {
                caps.get(k)
                    .map_or(Ok(1), |m| m.as_str().parse())
                    .map_err(|_| err(i, "hunk header number out of range"))
            };
            let mut hunk = Hunk {
                pre_start: num(1)?,
                pre_len: num(2)?,
                post_start: num(3)?,
                post_len: num(4)?,
                section: caps[5].to_string(),
                line_ops: Vec::new(),
            };
            let (mut pre_left, mut post_left) = (hunk.pre_len, hunk.post_len);
            i += 1;
            while pre_left > 0 || post_left > 0 {
                let Some(&body) = lines.get(i) else {
                    return Err(PatchError {
                        line: i,
                        message: format!(
                            "diff ends inside hunk; {pre_left} pre-image and {post_left} post-image line(s) missing"
                        ),
                        text: lines.get(i.wrapping_sub(1)).copied().unwrap_or("").to_string(),
                    });
                };
                let short = |i: usize| {
                    err(
                        i,
                        &format!(
                            "hunk shorter than its header; {pre_left} pre-image and {post_left} post-image line(s) missing"
                        ),
                    )
                };
                let op = match body.as_bytes().first() {
                    Some(b' ') | None => {
                        if pre_left == 0 || post_left == 0 {
                            return Err(short(i));
                        }
                        pre_left -= 1;
                        post_left -= 1;
                        LineOp::Context(body.get(1..).unwrap_or("").to_string())
                    }
                    Some(b'-') => {
                        if pre_left == 0 {
                            return Err(short(i));
                        }
                        pre_left -= 1;
                        LineOp::Delete(body[1..].to_string())
                    }
                    Some(b'+') => {
                        if post_left == 0 {
                            return Err(short(i));
                        }
                        post_left -= 1;
                        LineOp::Insert(body[1..].to_string())
                    }
                    Some(b'\\') => LineOp::NoNewline,
                    Some(_) => return Err(short(i)),
                };
                hunk.line_ops.push(op);
                i += 1;
            }
            if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                hunk.line_ops.push(LineOp::NoNewline);
                i += 1;
            }
            if let Some(&next) = lines.get(i) {
                if next != "-- "
                    && matches!(next.as_bytes().first(), Some(b'+' | b'-' | b' '))
                    && !(next.starts_with("--- ")
                        && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ ")))
                {
                    return Err(err(i, "hunk longer than its header declares"));
                }
            }
            pending.change.hunks.push(hunk);
            continue;
        }
        if let Some(pending) = current.as_mut().filter(|p| p.git && !p.saw_file_lines) {
            if line.starts_with("new file mode") {
                pending.new_file = true;
            } else if line.starts_with("deleted file mode") {
                pending.deleted_file = true;
            } else if let Some(p) = line
                .strip_prefix("rename from ")
                .or_else(|| line.strip_prefix("copy from "))
            {
                pending.change.path_before = Some(unquote(p));
            } else if let Some(p) = line
                .strip_prefix("rename to ")
                .or_else(|| line.strip_prefix("copy to "))
            {
                pending.change.path_after = Some(unquote(p));
            } else if line.starts_with("Binary files ") || line == "GIT binary patch" {
                pending.change.binary = true;
            }
        } else if line == "-- " {
            // format-patch signature
            break;
        }
        i += 1;
    }
    changes.extend(current.take().map(Pending::finish));
    Ok(GoldPatch {
        raw: diff_text.to_string(),
        file_changes: changes,
    })
}

fn header_path(field: &str, prefix: &str) -> Option<String> {
    // Drop a trailing timestamp separated by a tab.
    let field = field
        .split('\t')
        .next()
        .unwrap_or(field)
        .trim_end_matches('\r');
    let path = unquote(field);
    if path == DEV_NULL {
        return None;
    }
    Some(
        path.strip_prefix(prefix)
            .map(str::to_string)
            .unwrap_or(path),
    )
}

fn split_git_paths(rest: &str) -> (Option<String>, Option<String>) {
    if rest.starts_with('"') {
        let mut parts = Vec::new();
        let mut s = rest;
        while !s.is_empty() {
            s = s.trim_start();
            let end = if s.starts_with('"') {
                let mut escaped = false;
                s.char_indices()
                    .skip(1)
                    .find(|&(_, c)| {
                        let done = c == '"' && !escaped;
                        escaped = c == '\\' && !escaped;
                        done
                    })
                    .map_or(s.len(), |(k, _)| k + 1)
            } else {
                s.find(' ').unwrap_or(s.len())
            };
            parts.push(unquote(&s[..end]));
            s = &s[end..];
        }
        let strip = |p: &String, pre: &str| p.strip_prefix(pre).unwrap_or(p).to_string();
        return (
            parts.first().map(|p| strip(p, "a/")),
            parts.get(1).map(|p| strip(p, "b/")),
        );
    }
    let Some(body) = rest.strip_prefix("a/") else {
        return (None, None);
    };
    // Prefer the split that makes both sides equal, else the first " b/".
    let splits: Vec<usize> = body.match_indices(" b/").map(|(k, _)| k).collect();
    let pick = splits
        .iter()
        .copied()
        .find(|&k| body[..k] == body[k + 3..])
        .or_else(|| splits.first().copied());
    match pick {
        Some(k) => (Some(body[..k].to_string()), Some(body[k + 3..].to_string())),
        None => (None, None),
    }
}

fn unquote(s: &str) -> String {
    let Some(inner) = s.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
        return s.to_string();
    };
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

impl GoldPatch {
    pub fn is_empty(&self) -> bool {
        self.file_changes.is_empty()
    }

    /// Renders the parsed structure back to `git diff` form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for change in &self.file_changes {
            let before = change.path_before.as_deref();
            let after = change.path_after.as_deref();
            let a = before.or(after).unwrap_or_default();
            let b = after.or(before).unwrap_or_default();
            let _ = writeln!(out, "diff --git a/{a} b/{b}");
            if change.is_addition() {
                out.push_str("new file mode 100644\n");
            }
            if change.is_deletion() {
                out.push_str("deleted file mode 100644\n");
            }
            if change.is_rename() {
                let _ = writeln!(out, "rename from {a}\nrename to {b}");
            }
            if change.binary {
                let _ = writeln!(out, "Binary files a/{a} and b/{b} differ");
            }
            if change.hunks.is_empty() {
                continue;
            }
            let side = |p: Option<&str>, prefix: &str| {
                p.map_or(DEV_NULL.to_string(), |p| format!("{prefix}{p}"))
            };
            let _ = writeln!(out, "--- {}", side(before, "a/"));
            let _ = writeln!(out, "+++ {}", side(after, "b/"));
            for hunk in &change.hunks {
                out.push_str(&hunk.header());
                out.push('\n');
                for op in &hunk.line_ops {
                    match op {
                        LineOp::Context(t) => {
                            let _ = writeln!(out, " {t}");
                        }
                        LineOp::Delete(t) => {
                            let _ = writeln!(out, "-{t}");
                        }
                        LineOp::Insert(t) => {
                            let _ = writeln!(out, "+{t}");
                        }
                        LineOp::NoNewline => out.push_str("\\ No newline at end of file\n"),
                    }
                }
            }
        }
        out
    }
}

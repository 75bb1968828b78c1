use super::{CorpusError, LineSpan, PathFilter, TokenCounter};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

/// One source file with a line index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Relative to the snapshot root, `/`-separated.
    pub path: String,
    pub content: String,
    #[serde(skip)]
    line_starts: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let line_starts = line_starts(&content);
        SourceFile {
            path: path.into(),
            content,
            line_starts,
        }
    }

    /// Number of newline-terminated lines, counting a trailing unterminated one.
    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    /// Text of the lines in `span`, including the final line's newline if it
    /// has one. Lines past the end of the file are ignored.
    pub fn text(&self, span: LineSpan) -> &str {
        let n = self.line_count();
        if span.start > n {
            return "";
        }
        let from = self.line_starts[span.start - 1];
        let to = if span.end >= n {
            self.content.len()
        } else {
            self.line_starts[span.end]
        };
        &self.content[from..to]
    }

    /// A single line without its terminator.
    pub fn line(&self, number: usize) -> Option<&str> {
        if number == 0 || number > self.line_count() {
            return None;
        }
        let text = self.text(LineSpan::single(number));
        Some(
            text.strip_suffix('\n')
                .unwrap_or(text)
                .trim_end_matches('\r'),
        )
    }

    pub fn lines(&self) -> impl Iterator<Item = (usize, &str)> {
        (1..=self.line_count()).filter_map(move |n| self.line(n).map(|l| (n, l)))
    }

    pub fn full_span(&self) -> Option<LineSpan> {
        LineSpan::try_new(1, self.line_count())
    }
}

fn line_starts(content: &str) -> Vec<usize> {
    if content.is_empty() {
        return Vec::new();
    }
    let mut starts = vec![0];
    starts.extend(
        content
            .match_indices('\n')
            .map(|(i, _)| i + 1)
            .filter(|&i| i < content.len()),
    );
    starts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotOptions {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub commit_id: Option<String>,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        SnapshotOptions {
            include: vec!["*.py".to_string()],
            exclude: Vec::new(),
            commit_id: None,
        }
    }
}

/// Immutable view of a repository checkout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoSnapshot {
    root: PathBuf,
    commit_id: Option<String>,
    files: Vec<SourceFile>,
    warnings: Vec<String>,
}

impl RepoSnapshot {
    /// Builds a snapshot from in-memory files; paths are sorted and must be unique.
    pub fn from_files(root: impl Into<PathBuf>, mut files: Vec<SourceFile>) -> Self {
        files.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        files.dedup_by(|a, b| a.path == b.path);
        RepoSnapshot {
            root: root.into(),
            commit_id: None,
            files,
            warnings: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn commit_id(&self) -> Option<&str> {
        self.commit_id.as_deref()
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files
            .binary_search_by(|f| f.path.as_bytes().cmp(path.as_bytes()))
            .ok()
            .map(|i| &self.files[i])
    }

    /// SHA-256 over paths and contents; changes whenever any file does.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for file in &self.files {
            hasher.update((file.path.len() as u64).to_le_bytes());
            hasher.update(file.path.as_bytes());
            hasher.update((file.content.len() as u64).to_le_bytes());
            hasher.update(file.content.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Reads every file under `root` accepted by the include/exclude patterns.
///
/// `.git` directories are never entered and symlinks are not followed.
/// Unreadable files are skipped and reported in [`RepoSnapshot::warnings`].
pub fn load_snapshot(
    root: &Path,
    options: &SnapshotOptions,
    exec: Execution,
) -> Result<RepoSnapshot, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    let filter = PathFilter::new(&options.include, &options.exclude)?;

    let mut paths = Vec::new();
    let mut warnings = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) if err.depth() == 0 => {
                return Err(CorpusError::Walk {
                    path: root.to_path_buf(),
                    source: err,
                })
            }
            Err(err) => {
                warnings.push(format!("skipped unreadable entry: {err}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else {
            continue;
        };
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if filter.accepts(&rel) {
            paths.push(rel);
        }
    }
    paths.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));

    let read = exec.map(&paths, |rel| {
        std::fs::read(root.join(rel))
            .map(|bytes| SourceFile::new(rel.clone(), String::from_utf8_lossy(&bytes).into_owned()))
            .map_err(|err| format!("skipped {rel}: {err}"))
    });
    let mut files = Vec::with_capacity(read.len());
    for result in read {
        match result {
            Ok(file) => files.push(file),
            Err(warning) => warnings.push(warning),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(RepoSnapshot {
        root: root.to_path_buf(),
        commit_id: options.commit_id.clone(),
        files,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub file_count: usize,
    pub line_count: usize,
    pub token_count: usize,
}

pub fn snapshot_stats(snapshot: &RepoSnapshot, counter: &TokenCounter) -> SnapshotStats {
    snapshot
        .files()
        .iter()
        .fold(SnapshotStats::default(), |acc, f| SnapshotStats {
            file_count: acc.file_count + 1,
            line_count: acc.line_count + f.line_count(),
            token_count: acc.token_count + counter.count(&f.content),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(root: &Path, rel: &str, content: &str) {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    fn opts(include: &[&str], exclude: &[&str]) -> SnapshotOptions {
        SnapshotOptions {
            include: include.iter().map(|s| s.to_string()).collect(),
            exclude: exclude.iter().map(|s| s.to_string()).collect(),
            commit_id: None,
        }
    }

    #[test]
    fn line_counting() {
        assert_eq!(SourceFile::new("a", "").line_count(), 0);
        assert_eq!(SourceFile::new("a", "x\ny\n").line_count(), 2);
        assert_eq!(SourceFile::new("a", "x\ny").line_count(), 2);
        assert_eq!(SourceFile::new("a", "\n").line_count(), 1);
        assert_eq!(SourceFile::new("a", "\n\n").line_count(), 2);
    }

    #[test]
    fn span_text_slices_whole_lines() {
        let f = SourceFile::new("a", "one\ntwo\nthree");
        assert_eq!(f.text(LineSpan::new(1, 1)), "one\n");
        assert_eq!(f.text(LineSpan::new(2, 3)), "two\nthree");
        assert_eq!(f.text(LineSpan::new(2, 9)), "two\nthree");
        assert_eq!(f.text(LineSpan::new(4, 4)), "");
        assert_eq!(f.line(3), Some("three"));
        assert_eq!(f.line(4), None);
    }

    #[test]
    fn empty_directory_gives_empty_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let snap = load_snapshot(
            dir.path(),
            &SnapshotOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(snap.files().is_empty());
    }

    #[test]
    fn include_filter_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "b.txt", "text\n");
        write(dir.path(), "sub/c.py", "c = 1\n");
        write(dir.path(), "a.py", "a = 1\n");
        let snap = load_snapshot(dir.path(), &opts(&["*.py"], &[]), Execution::Sequential).unwrap();
        let paths: Vec<_> = snap.files().iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.py", "sub/c.py"]);
    }

    #[test]
    fn full_exclusion() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.py", "a = 1\n");
        let snap = load_snapshot(
            dir.path(),
            &opts(&["*.py"], &["a.py"]),
            Execution::Sequential,
        )
        .unwrap();
        assert!(snap.files().is_empty());
    }

    #[test]
    fn missing_root_is_fatal() {
        let err = load_snapshot(
            Path::new("/definitely/not/here"),
            &SnapshotOptions::default(),
            Execution::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::MissingRoot(_)));
    }

    #[test]
    fn invalid_utf8_is_replaced_and_git_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.py"), b"x = '\xff'\n").unwrap();
        write(dir.path(), ".git/hooks/x.py", "nope\n");
        let snap = load_snapshot(
            dir.path(),
            &SnapshotOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(snap.files().len(), 1);
        assert!(snap.files()[0].content.contains('\u{FFFD}'));
    }

    #[cfg(unix)]
    #[test]
    fn unreadable_file_is_recorded_as_warning() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ok.py", "a = 1\n");
        write(dir.path(), "locked.py", "b = 1\n");
        let locked = dir.path().join("locked.py");
        fs::set_permissions(&locked, fs::Permissions::from_mode(0o000)).unwrap();
        if fs::read(&locked).is_ok() {
            // running as root: permissions are not enforced
            return;
        }
        let snap = load_snapshot(
            dir.path(),
            &SnapshotOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(snap.files().len(), 1);
        assert_eq!(snap.warnings().len(), 1);
    }

    #[test]
    fn deterministic_across_modes() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..30 {
            write(
                dir.path(),
                &format!("pkg{}/m{i}.py", i % 4),
                &format!("x = {i}\n"),
            );
        }
        let a = load_snapshot(
            dir.path(),
            &SnapshotOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        let b = load_snapshot(
            dir.path(),
            &SnapshotOptions::default(),
            Execution::parallel(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn stats() {
        let counter = TokenCounter::approximate();
        let empty = RepoSnapshot::from_files("/", vec![]);
        assert_eq!(snapshot_stats(&empty, &counter), SnapshotStats::default());
        let one = RepoSnapshot::from_files("/", vec![SourceFile::new("f.py", "x\ny\n")]);
        let stats = snapshot_stats(&one, &counter);
        assert_eq!(
            (stats.file_count, stats.line_count, stats.token_count),
            (1, 2, 1)
        );
    }
}

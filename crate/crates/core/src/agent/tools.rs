use super::toolcall::ToolCall;
use crate::corpus::{CodeIndex, ExtractorRegistry, RepoSnapshot};
use crate::exec::Execution;
use crate::retrieval::{
    build_chunks, Bm25Index, Bm25Params, RetrievalError, SearchHit, StructureSearch, ToolOutcome,
};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Everything the tools need about one repository checkout. Read-only once built.
#[derive(Debug, Clone)]
pub struct RepoContext {
    pub snapshot: RepoSnapshot,
    pub code_index: CodeIndex,
    pub bm25: Bm25Index,
}

impl RepoContext {
    pub fn build(
        snapshot: RepoSnapshot,
        registry: &ExtractorRegistry,
        window: usize,
        params: Bm25Params,
        exec: Execution,
    ) -> Self {
        let code_index = CodeIndex::build(&snapshot, registry, exec);
        Self::from_index(snapshot, code_index, window, params, exec)
    }

    /// Reuses an already extracted entity index.
    pub fn from_index(
        snapshot: RepoSnapshot,
        code_index: CodeIndex,
        window: usize,
        params: Bm25Params,
        exec: Execution,
    ) -> Self {
        let bm25 = Bm25Index::build(build_chunks(&snapshot, &code_index, window), params, exec);
        RepoContext {
            snapshot,
            code_index,
            bm25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolsetKind {
    Bm25,
    Acr,
}

impl fmt::Display for ToolsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToolsetKind::Bm25 => "bm25",
            ToolsetKind::Acr => "acr",
        })
    }
}

impl std::str::FromStr for ToolsetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bm25" => Ok(ToolsetKind::Bm25),
            "acr" => Ok(ToolsetKind::Acr),
            other => Err(format!("unknown toolset {other:?}; expected bm25 or acr")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [&'static str],
}

/// Failure returned to the agent as an observation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("missing argument {0:?}")]
    MissingArgument(String),
    #[error("unexpected argument {0:?}")]
    UnexpectedArgument(String),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

pub trait Toolset: Send + Sync {
    fn kind(&self) -> ToolsetKind;
    fn specs(&self) -> &'static [ToolSpec];
    fn execute(&self, call: &ToolCall) -> Result<ToolOutcome, ToolError>;

    fn tool_names(&self) -> Vec<&'static str> {
        self.specs().iter().map(|s| s.name).collect()
    }

    /// Human-readable registry shown to policies.
    fn describe(&self) -> String {
        self.specs()
            .iter()
            .map(|s| {
                let args: Vec<String> = s.params.iter().map(|p| format!("{p}=<...>")).collect();
                format!("- {}({}): {}", s.name, args.join(", "), s.description)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn checked_args<'c>(call: &'c ToolCall, spec: &ToolSpec) -> Result<Vec<&'c str>, ToolError> {
    if let Some(extra) = call
        .arguments
        .keys()
        .find(|k| !spec.params.contains(&k.as_str()))
    {
        return Err(ToolError::UnexpectedArgument(extra.clone()));
    }
    spec.params
        .iter()
        .map(|p| {
            call.arguments
                .get(*p)
                .map(String::as_str)
                .ok_or_else(|| ToolError::MissingArgument(p.to_string()))
        })
        .collect()
}

fn find_spec(specs: &'static [ToolSpec], name: &str) -> Result<&'static ToolSpec, ToolError> {
    specs
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ToolError::UnknownTool(name.to_string()))
}

const BM25_SPECS: &[ToolSpec] = &[ToolSpec {
    name: "search_bm25",
    description:
        "lexical BM25 search over code chunks of the repository; returns the best matching chunks",
    params: &["query"],
}];

/// Single-tool BM25 toolset.
pub struct Bm25Tools<'a> {
    index: &'a Bm25Index,
    top_k: usize,
}

impl<'a> Bm25Tools<'a> {
    pub fn new(index: &'a Bm25Index, top_k: usize) -> Self {
        Bm25Tools {
            index,
            top_k: top_k.max(1),
        }
    }
}

impl Toolset for Bm25Tools<'_> {
    fn kind(&self) -> ToolsetKind {
        ToolsetKind::Bm25
    }

    fn specs(&self) -> &'static [ToolSpec] {
        BM25_SPECS
    }

    fn execute(&self, call: &ToolCall) -> Result<ToolOutcome, ToolError> {
        let spec = find_spec(BM25_SPECS, &call.tool_name)?;
        let args = checked_args(call, spec)?;
        let ranked = self.index.ranked(args[0]);
        let total_matches = ranked.len();
        let hits = self.index.search(args[0], self.top_k);
        Ok(ToolOutcome {
            hits,
            total_matches,
        })
    }
}

const ACR_SPECS: &[ToolSpec] = &[
    ToolSpec {
        name: "search_class",
        description: "find classes with exactly this name",
        params: &["class_name"],
    },
    ToolSpec {
        name: "search_method",
        description: "find functions or methods with exactly this name",
        params: &["method_name"],
    },
    ToolSpec {
        name: "search_method_in_class",
        description: "find a method with exactly this name inside a class with exactly this name",
        params: &["class_name", "method_name"],
    },
    ToolSpec {
        name: "search_code",
        description:
            "find code containing this exact text; returns the enclosing function or class",
        params: &["code_str"],
    },
    ToolSpec {
        name: "search_code_in_file",
        description:
            "like search_code, restricted to one file (path relative to the repository root)",
        params: &["code_str", "file_name"],
    },
];

/// Structure-aware toolset over extracted entities.
pub struct AcrTools<'a> {
    search: StructureSearch<'a>,
}

impl<'a> AcrTools<'a> {
    pub fn new(repo: &'a RepoContext, result_limit: usize) -> Self {
        AcrTools {
            search: StructureSearch::new(&repo.snapshot, &repo.code_index).with_limit(result_limit),
        }
    }
}

impl Toolset for AcrTools<'_> {
    fn kind(&self) -> ToolsetKind {
        ToolsetKind::Acr
    }

    fn specs(&self) -> &'static [ToolSpec] {
        ACR_SPECS
    }

    fn execute(&self, call: &ToolCall) -> Result<ToolOutcome, ToolError> {
        let spec = find_spec(ACR_SPECS, &call.tool_name)?;
        let args = checked_args(call, spec)?;
        let outcome = match spec.name {
            "search_class" => self.search.search_class(args[0]),
            "search_method" => self.search.search_method(args[0]),
            "search_method_in_class" => self.search.search_method_in_class(args[0], args[1]),
            "search_code" => self.search.search_code(args[0])?,
            "search_code_in_file" => self.search.search_code_in_file(args[0], args[1])?,
            other => return Err(ToolError::UnknownTool(other.to_string())),
        };
        Ok(outcome)
    }
}

/// Builds the toolset for `kind` over `repo`.
pub fn toolset_for<'a>(
    kind: ToolsetKind,
    repo: &'a RepoContext,
    top_k: usize,
    result_limit: usize,
) -> Box<dyn Toolset + 'a> {
    match kind {
        ToolsetKind::Bm25 => Box::new(Bm25Tools::new(&repo.bm25, top_k)),
        ToolsetKind::Acr => Box::new(AcrTools::new(repo, result_limit)),
    }
}

/// Text the policy sees after a tool ran.
pub fn render_observation(call: &ToolCall, result: &Result<ToolOutcome, ToolError>) -> String {
    match result {
        Err(err) => format!("{} failed: {err}", call.signature()),
        Ok(outcome) if outcome.hits.is_empty() => format!("{}: no results", call.signature()),
        Ok(outcome) => {
            let mut out = if outcome.truncated() {
                format!(
                    "{}: showing {} of {} results",
                    call.signature(),
                    outcome.hits.len(),
                    outcome.total_matches
                )
            } else {
                format!("{}: {} result(s)", call.signature(), outcome.hits.len())
            };
            for hit in &outcome.hits {
                out.push_str(&render_hit(hit));
            }
            out
        }
    }
}

fn render_hit(hit: &SearchHit) -> String {
    let mut s = format!("\n--- {}:{}\n{}", hit.file, hit.span, hit.snippet);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.pop();
    s
}

//! Retrieval strategies: the single-shot BM25 baseline and the ReAct loop.

mod baseline;
mod context;
mod policy;
pub mod prompts;
mod react;
mod toolcall;
mod tools;

pub use baseline::run_baseline;
pub use context::{add_to_context, ContextItem, ContextSet};
pub use policy::{
    parse_chat_response, Policy, PolicyError, PolicyRequest, RemotePolicy, RemotePolicyConfig,
    ScriptedPolicy, DEFAULT_ENDPOINT, DEFAULT_MODEL, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use react::{
    check_stop_cl, check_stop_tc, parse_verdict, run_react, self_reflect, AgentError, ConfigError,
    PartialRun, ReactOutcome, Reflection, RunDiagnostics, StopReason, Stopping, StrategyConfig,
    TranscriptStep, Verdict,
};
pub use toolcall::{parse_output, ParsedOutput, ToolCall, TOOL_FENCE};
pub use tools::{
    render_observation, toolset_for, AcrTools, Bm25Tools, RepoContext, ToolError, ToolSpec,
    Toolset, ToolsetKind,
};

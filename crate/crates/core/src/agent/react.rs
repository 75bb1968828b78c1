//! The ReAct loop and its stopping criteria.
//!
//! Each step asks the policy for an output, parses at most one tool call,
//! executes it, folds every returned snippet into the context, then checks the
//! configured criterion:
//!
//! - `cl`: stop once the context holds at least `context_threshold_tokens`.
//! - `tc`: stop at the first output that attempts no tool call.
//! - `sr`: like `tc`, but first ask the policy whether the context suffices;
//!   an `INSUFFICIENT` (or unreadable) verdict resumes the loop.
//!
//! `max_steps` caps every mode.

use super::context::ContextSet;
use super::policy::{Policy, PolicyError, PolicyRequest};
use super::toolcall::{parse_output, ParsedOutput, ToolCall};
use super::tools::{render_observation, Toolset, ToolsetKind};
use crate::corpus::TokenCounter;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stopping {
    Baseline,
    Cl,
    Tc,
    Sr,
}

impl fmt::Display for Stopping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stopping::Baseline => "baseline",
            Stopping::Cl => "cl",
            Stopping::Tc => "tc",
            Stopping::Sr => "sr",
        })
    }
}

impl std::str::FromStr for Stopping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Stopping::Baseline),
            "cl" => Ok(Stopping::Cl),
            "tc" => Ok(Stopping::Tc),
            "sr" => Ok(Stopping::Sr),
            other => Err(format!(
                "unknown stopping criterion {other:?}; expected baseline, cl, tc or sr"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("the baseline strategy only exists with the bm25 toolset")]
    BaselineNeedsBm25,
    #[error("{0} must be at least 1")]
    NonPositive(&'static str),
    #[error("the baseline strategy does not run the ReAct loop")]
    BaselineIsNotALoop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub toolset: ToolsetKind,
    pub stopping: Stopping,
    pub context_threshold_tokens: usize,
    pub max_steps: usize,
    /// Hits per BM25 tool call.
    pub top_k: usize,
    /// Hits per structure tool call.
    pub result_limit: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            toolset: ToolsetKind::Bm25,
            stopping: Stopping::Tc,
            context_threshold_tokens: 500,
            max_steps: 25,
            top_k: 5,
            result_limit: crate::retrieval::DEFAULT_RESULT_LIMIT,
        }
    }
}

impl StrategyConfig {
    pub fn new(toolset: ToolsetKind, stopping: Stopping) -> Self {
        StrategyConfig {
            toolset,
            stopping,
            ..StrategyConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.stopping == Stopping::Baseline && self.toolset != ToolsetKind::Bm25 {
            return Err(ConfigError::BaselineNeedsBm25);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::NonPositive("max_steps"));
        }
        if self.top_k == 0 {
            return Err(ConfigError::NonPositive("top_k"));
        }
        if self.result_limit == 0 {
            return Err(ConfigError::NonPositive("result_limit"));
        }
        Ok(())
    }

    /// e.g. `bm25-tc`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.toolset, self.stopping)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CriterionMet,
    NoToolCall,
    ReflectionSufficient,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Sufficient,
    Insufficient,
    /// Neither keyword led the reply; handled as insufficient.
    Unparseable,
}

impl Verdict {
    pub fn is_sufficient(self) -> bool {
        self == Verdict::Sufficient
    }
}

/// Exact match of the first word, ignoring trailing punctuation.
pub fn parse_verdict(reply: &str) -> Verdict {
    let first = reply
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_end_matches(|c: char| c.is_ascii_punctuation());
    match first {
        "SUFFICIENT" => Verdict::Sufficient,
        "INSUFFICIENT" => Verdict::Insufficient,
        _ => Verdict::Unparseable,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflection {
    pub context_summary: String,
    pub reply: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub step_index: usize,
    pub policy_output: String,
    pub parsed_call: Option<ToolCall>,
    /// Rendered tool result; empty whenever `parsed_call` is absent.
    pub observation: String,
    /// Why an attempted tool block was rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<Reflection>,
    /// Context size after this step.
    pub context_tokens: usize,
}

impl TranscriptStep {
    pub fn attempted_call(&self) -> bool {
        self.parsed_call.is_some() || self.parse_error.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub tool_calls: usize,
    pub parse_failures: usize,
    pub tool_errors: usize,
    pub reflections: usize,
    pub unparseable_verdicts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactOutcome {
    pub context: ContextSet,
    pub transcript: Vec<TranscriptStep>,
    pub stop_reason: StopReason,
    pub diagnostics: RunDiagnostics,
}

/// State of a run that was cut short.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRun {
    pub context: ContextSet,
    pub transcript: Vec<TranscriptStep>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("policy failed after {} step(s): {source}", partial.transcript.len())]
    Transport {
        #[source]
        source: PolicyError,
        partial: Box<PartialRun>,
    },
}

pub fn check_stop_cl(context: &ContextSet, threshold: usize) -> bool {
    context.total_tokens() >= threshold
}

/// True only for pure prose: a malformed tool block still counts as a call.
pub fn check_stop_tc(step: &TranscriptStep) -> bool {
    !step.attempted_call()
}

pub fn self_reflect(
    policy: &dyn Policy,
    request: &PolicyRequest<'_>,
    context: &ContextSet,
) -> Result<Reflection, PolicyError> {
    let context_summary = context.summary();
    let reply = policy.reflect(request, &context_summary)?;
    Ok(Reflection {
        verdict: parse_verdict(&reply),
        context_summary,
        reply,
    })
}

pub fn run_react(
    tools: &dyn Toolset,
    task: &str,
    policy: &dyn Policy,
    config: &StrategyConfig,
    counter: &TokenCounter,
) -> Result<ReactOutcome, AgentError> {
    config.validate()?;
    if config.stopping == Stopping::Baseline {
        return Err(ConfigError::BaselineIsNotALoop.into());
    }
    let registry = tools.describe();
    let tool_names = tools.tool_names();
    let mut context = ContextSet::new();
    let mut transcript: Vec<TranscriptStep> = Vec::new();
    let mut diagnostics = RunDiagnostics::default();

    macro_rules! bail {
        ($err:expr) => {
            return Err(AgentError::Transport {
                source: $err,
                partial: Box::new(PartialRun {
                    context,
                    transcript,
                    diagnostics,
                }),
            })
        };
    }

    for step_index in 1..=config.max_steps {
        let request = PolicyRequest {
            task,
            transcript: &transcript,
            tools: &registry,
            stopping: config.stopping,
        };
        let output = match policy.next_output(&request) {
            Ok(output) => output,
            Err(err) => bail!(err),
        };

        let mut step = TranscriptStep {
            step_index,
            policy_output: output,
            parsed_call: None,
            observation: String::new(),
            parse_error: None,
            reflection: None,
            context_tokens: 0,
        };
        match parse_output(&step.policy_output, &tool_names) {
            ParsedOutput::Prose => {}
            ParsedOutput::Malformed(reason) => {
                diagnostics.parse_failures += 1;
                step.parse_error = Some(reason);
            }
            ParsedOutput::Call(call) => {
                diagnostics.tool_calls += 1;
                let result = tools.execute(&call);
                match &result {
                    Ok(outcome) => context.add_hits(&outcome.hits, counter),
                    Err(_) => diagnostics.tool_errors += 1,
                }
                step.observation = render_observation(&call, &result);
                step.parsed_call = Some(call);
            }
        }
        step.context_tokens = context.total_tokens();

        let stop = match config.stopping {
            Stopping::Cl => check_stop_cl(&context, config.context_threshold_tokens)
                .then_some(StopReason::CriterionMet),
            Stopping::Tc => check_stop_tc(&step).then_some(StopReason::NoToolCall),
            Stopping::Sr if check_stop_tc(&step) => {
                let request = PolicyRequest {
                    task,
                    transcript: &transcript,
                    tools: &registry,
                    stopping: config.stopping,
                };
                let reflection = match self_reflect(policy, &request, &context) {
                    Ok(r) => r,
                    Err(err) => {
                        transcript.push(step);
                        bail!(err)
                    }
                };
                diagnostics.reflections += 1;
                if reflection.verdict == Verdict::Unparseable {
                    diagnostics.unparseable_verdicts += 1;
                }
                let sufficient = reflection.verdict.is_sufficient();
                step.reflection = Some(reflection);
                sufficient.then_some(StopReason::ReflectionSufficient)
            }
            Stopping::Sr | Stopping::Baseline => None,
        };
        transcript.push(step);
        if let Some(stop_reason) = stop {
            return Ok(ReactOutcome {
                context,
                transcript,
                stop_reason,
                diagnostics,
            });
        }
    }
    Ok(ReactOutcome {
        context,
        transcript,
        stop_reason: StopReason::StepLimit,
        diagnostics,
    })
}

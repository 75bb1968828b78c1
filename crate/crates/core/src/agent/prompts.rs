//! Prompt templates for chat-style policies. Bump [`PROMPT_VERSION`] whenever
//! any template text changes; the version is recorded in run manifests.

use super::react::{Stopping, TranscriptStep};
use super::toolcall::TOOL_FENCE;
use serde::{Deserialize, Serialize};

pub const PROMPT_VERSION: &str = "ctxlab-prompts/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

fn system_prompt(tools: &str, stopping: Stopping) -> String {
    let ending = match stopping {
        Stopping::Cl => {
            "Keep issuing searches; the session ends automatically once enough code has been collected."
        }
        _ => "When you are confident the collected code is enough to make the change, reply without a tool block.",
    };
    format!(
        "You are exploring a Python repository to collect the code that must be read or modified \
to carry out a change request. You cannot edit files; your only job is to find the relevant \
classes, functions and files.\n\n\
Available tools:\n{tools}\n\n\
To call a tool, think briefly, then write exactly one block of this form:\n\
{TOOL_FENCE}\n<tool name>\n<argument>=<value>\n```\n\
Put each argument on its own line. Every code fragment returned by a tool is added to the \
collected context.\n\n{ending}"
    )
}

fn task_prompt(task: &str) -> String {
    format!("Change request:\n\n{task}")
}

const PARSE_FEEDBACK: &str = "Your tool block could not be understood";
const CONTINUE_CL: &str = "No tool call found. Continue gathering context with a tool call.";
const CONTINUE_AFTER_REFLECTION: &str =
    "The collected context is not yet sufficient. Continue gathering context.";

pub fn reflection_question(context_summary: &str) -> String {
    format!(
        "Collected context so far:\n{context_summary}\n\n\
Is this context sufficient to carry out the change request? Answer with SUFFICIENT or \
INSUFFICIENT as the first word, followed by a short justification."
    )
}

/// Conversation replayed to a chat model before asking for the next step.
pub fn conversation(
    task: &str,
    transcript: &[TranscriptStep],
    tools: &str,
    stopping: Stopping,
) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::new("system", system_prompt(tools, stopping)),
        ChatMessage::new("user", task_prompt(task)),
    ];
    for step in transcript {
        messages.push(ChatMessage::new("assistant", step.policy_output.clone()));
        if let Some(err) = &step.parse_error {
            messages.push(ChatMessage::new("user", format!("{PARSE_FEEDBACK}: {err}")));
        } else if step.parsed_call.is_some() {
            messages.push(ChatMessage::new("user", step.observation.clone()));
        } else if stopping == Stopping::Cl {
            messages.push(ChatMessage::new("user", CONTINUE_CL));
        }
        if let Some(reflection) = &step.reflection {
            messages.push(ChatMessage::new(
                "user",
                reflection_question(&reflection.context_summary),
            ));
            messages.push(ChatMessage::new("assistant", reflection.reply.clone()));
            messages.push(ChatMessage::new("user", CONTINUE_AFTER_REFLECTION));
        }
    }
    messages
}

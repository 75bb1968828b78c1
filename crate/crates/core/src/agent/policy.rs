//! Decision sources for the agent loop.

use super::prompts::{conversation, reflection_question, ChatMessage, PROMPT_VERSION};
use super::react::{Stopping, TranscriptStep};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

/// Everything a policy may look at when choosing its next output.
#[derive(Debug, Clone, Copy)]
pub struct PolicyRequest<'a> {
    pub task: &'a str,
    pub transcript: &'a [TranscriptStep],
    /// Rendered tool registry.
    pub tools: &'a str,
    pub stopping: Stopping,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("invalid policy configuration: {0}")]
    Config(String),
}

pub trait Policy: Send + Sync {
    /// Short description recorded in manifests.
    fn descriptor(&self) -> String;

    fn next_output(&self, request: &PolicyRequest<'_>) -> Result<String, PolicyError>;

    /// Raw reply to the sufficiency question; parsed by the caller.
    fn reflect(
        &self,
        request: &PolicyRequest<'_>,
        context_summary: &str,
    ) -> Result<String, PolicyError>;
}

/// Replays a fixed trace. Output `n` is chosen by the number of steps already
/// in the transcript and verdict `n` by the number of reflections so far, so
/// replies depend only on the request.
///
/// Trace files are plain text:
///
/// ~~~text
/// # comments are allowed before the first marker
/// === step
/// Looking for the parser.
/// ```tool
/// search_class
/// class_name=Parser
/// ```
/// === step
/// That is everything.
/// === reflections
/// INSUFFICIENT need the caller too
/// SUFFICIENT
/// ~~~
///
/// Past the end of the trace the policy answers with empty prose, and with
/// `SUFFICIENT` once verdicts run out.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedPolicy {
    outputs: Vec<String>,
    verdicts: Vec<String>,
    label: String,
}

const STEP_MARKER: &str = "=== step";
const REFLECTIONS_MARKER: &str = "=== reflections";

impl ScriptedPolicy {
    pub fn new(outputs: Vec<String>, verdicts: Vec<String>) -> Self {
        ScriptedPolicy {
            outputs,
            verdicts,
            label: "scripted".to_string(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut policy = Self::parse(&text)
            .map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?;
        policy.label = format!("scripted:{}", path.display());
        Ok(policy)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        enum Section {
            Preamble,
            Step,
            Reflections,
        }
        let mut section = Section::Preamble;
        let mut outputs: Vec<Vec<&str>> = Vec::new();
        let mut verdicts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let marker = line.trim_end();
            if marker == STEP_MARKER {
                if matches!(section, Section::Reflections) {
                    return Err(format!("line {}: step after reflections section", n + 1));
                }
                section = Section::Step;
                outputs.push(Vec::new());
                continue;
            }
            if marker == REFLECTIONS_MARKER {
                section = Section::Reflections;
                continue;
            }
            match section {
                Section::Preamble => {
                    if !line.trim().is_empty() && !line.starts_with('#') {
                        return Err(format!("line {}: text before the first marker", n + 1));
                    }
                }
                Section::Step => outputs.last_mut().expect("step open").push(line),
                Section::Reflections => {
                    if !line.trim().is_empty() {
                        verdicts.push(line.trim().to_string());
                    }
                }
            }
        }
        let outputs = outputs
            .into_iter()
            .map(|lines| lines.join("\n").trim_matches('\n').to_string())
            .collect();
        Ok(ScriptedPolicy::new(outputs, verdicts))
    }

    pub fn to_trace(&self) -> String {
        let mut out = String::new();
        for o in &self.outputs {
            out.push_str(STEP_MARKER);
            out.push('\n');
            out.push_str(o);
            out.push('\n');
        }
        if !self.verdicts.is_empty() {
            out.push_str(REFLECTIONS_MARKER);
            out.push('\n');
            for v in &self.verdicts {
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }
}

impl Policy for ScriptedPolicy {
    fn descriptor(&self) -> String {
        self.label.clone()
    }

    fn next_output(&self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        Ok(self
            .outputs
            .get(request.transcript.len())
            .cloned()
            .unwrap_or_default())
    }

    fn reflect(&self, request: &PolicyRequest<'_>, _summary: &str) -> Result<String, PolicyError> {
        let asked = request
            .transcript
            .iter()
            .filter(|s| s.reflection.is_some())
            .count();
        Ok(self
            .verdicts
            .get(asked)
            .cloned()
            .unwrap_or_else(|| "SUFFICIENT".to_string()))
    }
}

pub const ENV_ENDPOINT: &str = "CTXLAB_ENDPOINT";
pub const ENV_API_KEY: &str = "CTXLAB_API_KEY";
pub const ENV_MODEL: &str = "CTXLAB_MODEL";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-16k";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemotePolicyConfig {
    pub endpoint: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for RemotePolicyConfig {
    fn default() -> Self {
        RemotePolicyConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key: None,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            timeout_secs: 120,
            max_retries: 2,
        }
    }
}

impl RemotePolicyConfig {
    /// Reads `CTXLAB_ENDPOINT`, `CTXLAB_API_KEY` and `CTXLAB_MODEL`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let defaults = RemotePolicyConfig::default();
        RemotePolicyConfig {
            endpoint: var(ENV_ENDPOINT).unwrap_or(defaults.endpoint),
            api_key: var(ENV_API_KEY),
            model: var(ENV_MODEL).unwrap_or(defaults.model),
            ..defaults
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

/// Policy backed by an OpenAI-compatible chat completions endpoint.
pub struct RemotePolicy {
    config: RemotePolicyConfig,
    agent: ureq::Agent,
}

impl RemotePolicy {
    pub fn new(config: RemotePolicyConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        RemotePolicy { config, agent }
    }

    pub fn config(&self) -> &RemotePolicyConfig {
        &self.config
    }

    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, PolicyError> {
        let body = serde_json::to_string(&ChatRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
        })
        .map_err(|e| PolicyError::Transport(e.to_string()))?;

        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Err(PolicyError::Transport(msg)) if attempt < self.config.max_retries => {
                    attempt += 1;
                    log::warn!("chat request failed ({msg}); retry {attempt}");
                    std::thread::sleep(Duration::from_millis(500 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }

    fn send_once(&self, body: &str) -> Result<String, PolicyError> {
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send(body)
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(PolicyError::Transport(format!("HTTP {status}: {text}")));
        }
        if status >= 400 {
            return Err(PolicyError::Response(format!("HTTP {status}: {text}")));
        }
        parse_chat_response(&text)
    }
}

/// Extracts `choices[0].message.content`.
pub fn parse_chat_response(text: &str) -> Result<String, PolicyError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PolicyError::Response(e.to_string()))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| PolicyError::Response("missing choices[0].message.content".into()))
}

impl Policy for RemotePolicy {
    fn descriptor(&self) -> String {
        format!(
            "remote:{}@{} (t={}, {PROMPT_VERSION})",
            self.config.model, self.config.endpoint, self.config.temperature
        )
    }

    fn next_output(&self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        let messages = conversation(
            request.task,
            request.transcript,
            request.tools,
            request.stopping,
        );
        self.complete(&messages)
    }

    fn reflect(
        &self,
        request: &PolicyRequest<'_>,
        context_summary: &str,
    ) -> Result<String, PolicyError> {
        let mut messages = conversation(
            request.task,
            request.transcript,
            request.tools,
            request.stopping,
        );
        messages.push(ChatMessage::new(
            "user",
            reflection_question(context_summary),
        ));
        self.complete(&messages)
    }
}

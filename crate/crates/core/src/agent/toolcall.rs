//! Parsing tool calls out of free-form policy output.
//!
//! A call is a single fenced block tagged `tool`: the first non-empty line is
//! the tool name, every following non-empty line is `key=value`.
//!
//! ````text
//! ```tool
//! search_class
//! class_name=Parser
//! ```
//! ````
//!
//! Keys are trimmed, values are taken verbatim after the first `=`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TOOL_FENCE: &str = "```tool";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_name: String,
    pub arguments: BTreeMap<String, String>,
}

impl ToolCall {
    pub fn new<I, K, V>(tool_name: &str, arguments: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        ToolCall {
            tool_name: tool_name.to_string(),
            arguments: arguments
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Renders the call in the fenced syntax understood by [`parse_output`].
    pub fn render(&self) -> String {
        let mut out = format!("{TOOL_FENCE}\n{}\n", self.tool_name);
        for (k, v) in &self.arguments {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str("```");
        out
    }

    pub fn signature(&self) -> String {
        let args: Vec<String> = self
            .arguments
            .iter()
            .map(|(k, v)| format!("{k}={v:?}"))
            .collect();
        format!("{}({})", self.tool_name, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedOutput {
    /// No tool block at all.
    Prose,
    Call(ToolCall),
    /// A tool block was attempted but could not be understood.
    Malformed(String),
}

/// Classifies a policy output. `known_tools` restricts accepted tool names.
pub fn parse_output(output: &str, known_tools: &[&str]) -> ParsedOutput {
    let lines: Vec<&str> = output.lines().map(|l| l.trim_end_matches('\r')).collect();
    let openers: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim() == TOOL_FENCE)
        .map(|(i, _)| i)
        .collect();
    let Some(&open) = openers.first() else {
        return ParsedOutput::Prose;
    };
    if openers.len() > 1 {
        return ParsedOutput::Malformed("only one tool call is allowed per reply".into());
    }
    let Some(close) = lines[open + 1..]
        .iter()
        .position(|l| l.trim() == "```")
        .map(|p| open + 1 + p)
    else {
        return ParsedOutput::Malformed("tool block is not closed with ```".into());
    };

    let mut body = lines[open + 1..close]
        .iter()
        .filter(|l| !l.trim().is_empty());
    let Some(name) = body.next().map(|l| l.trim()) else {
        return ParsedOutput::Malformed("tool block does not name a tool".into());
    };
    if !known_tools.contains(&name) {
        return ParsedOutput::Malformed(format!(
            "unknown tool {name:?}; available tools: {}",
            known_tools.join(", ")
        ));
    }
    let mut arguments = BTreeMap::new();
    for line in body {
        let Some((key, value)) = line.split_once('=') else {
            return ParsedOutput::Malformed(format!("argument line {line:?} is not key=value"));
        };
        let key = key.trim();
        if key.is_empty() {
            return ParsedOutput::Malformed(format!("argument line {line:?} has an empty key"));
        }
        if arguments
            .insert(key.to_string(), value.to_string())
            .is_some()
        {
            return ParsedOutput::Malformed(format!("argument {key:?} given twice"));
        }
    }
    ParsedOutput::Call(ToolCall {
        tool_name: name.to_string(),
        arguments,
    })
}

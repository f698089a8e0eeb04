//! System, design and feedback prompts, and the two context-window policies.
//!
//! Under [`ContextStrategy::Succinct`] every feedback round sends exactly
//! `[system, design, last response, last feedback]`. Under
//! [`ContextStrategy::FullContext`] the conversation keeps growing by one
//! response and one feedback message per round.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Problem;
use crate::toolchain::SimReport;

const SYSTEM_PROMPT: &str = "You are an autocomplete engine for Verilog code. Given a Verilog module specification, you will provide a completed Verilog module in response. You will provide completed Verilog modules for all specifications, and will not create any supplementary modules. Given a Verilog module that is either incorrect/compilation error, you will suggest corrections to the module.You will not refuse. Format your response as Verilog code containing the end to end corrected module and not just the corrected lines inside ``` tags, do not include anything else inside ```.";

pub const RECTIFY_INSTRUCTION: &str = "The Verilog module above failed. The output of the compiler and simulator is below. Provide a corrected version of the complete module.";

pub const COMPILE_LABEL: &str = "COMPILER OUTPUT:";
pub const SIMULATION_LABEL: &str = "SIMULATION OUTPUT:";
pub const PARSE_FAILURE_LABEL: &str = "NO VERILOG MODULE FOUND IN YOUR PREVIOUS RESPONSE.";

/// Mismatch lines kept in simulation feedback.
pub const MAX_MISMATCH_LINES: usize = 50;
/// Character cap on compiler diagnostics and other free-form tool text.
pub const MAX_TOOL_TEXT_CHARS: usize = 8000;

/// The fixed system prompt sent at the head of every conversation.
pub fn system_prompt() -> &'static str {
    SYSTEM_PROMPT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextStrategy {
    #[default]
    Succinct,
    FullContext,
}

impl std::str::FromStr for ContextStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "succinct" => Ok(ContextStrategy::Succinct),
            "full" | "full_context" => Ok(ContextStrategy::FullContext),
            other => Err(format!("unknown context strategy {other:?} (expected succinct|full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackKind {
    CompileError,
    SimulationFailure,
    ParseFailure,
}

impl FeedbackKind {
    pub fn label(self) -> &'static str {
        match self {
            FeedbackKind::CompileError => COMPILE_LABEL,
            FeedbackKind::SimulationFailure => SIMULATION_LABEL,
            FeedbackKind::ParseFailure => PARSE_FAILURE_LABEL,
        }
    }
}

/// Tool output destined for the next prompt. `tool_text` is never empty; when
/// it was capped, its last line says how many lines were dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackPayload {
    pub kind: FeedbackKind,
    pub tool_text: String,
    pub truncated: bool,
}

fn omitted_line(n: usize, what: &str) -> String {
    format!("[{n} {what} omitted]")
}

/// Cap free-form text at [`MAX_TOOL_TEXT_CHARS`], cutting on a line boundary.
fn cap_text(text: &str) -> (String, bool) {
    let text = text.trim_end();
    if text.chars().count() <= MAX_TOOL_TEXT_CHARS {
        return (text.to_string(), false);
    }
    let mut kept = String::new();
    let mut kept_chars = 0;
    let lines: Vec<&str> = text.lines().collect();
    let mut kept_lines = 0;
    for line in &lines {
        let len = line.chars().count() + 1;
        if kept_chars + len > MAX_TOOL_TEXT_CHARS {
            break;
        }
        kept.push_str(line);
        kept.push('\n');
        kept_chars += len;
        kept_lines += 1;
    }
    if kept_lines == 0 {
        // A single enormous line: hard cut it.
        kept = lines[0].chars().take(MAX_TOOL_TEXT_CHARS).collect();
        kept.push('\n');
        kept_lines = 1;
    }
    kept.push_str(&omitted_line(lines.len() - kept_lines, "lines"));
    (kept, true)
}

impl FeedbackPayload {
    /// Compiler diagnostics from a failed build.
    pub fn compile_error(diagnostics: &str) -> Self {
        let text = if diagnostics.trim().is_empty() {
            "compilation failed without diagnostics".to_string()
        } else {
            diagnostics.to_string()
        };
        let (tool_text, truncated) = cap_text(&text);
        Self {
            kind: FeedbackKind::CompileError,
            tool_text,
            truncated,
        }
    }

    /// Feedback-grammar lines from a completed simulation, in output order.
    /// The first [`MAX_MISMATCH_LINES`] mismatch lines are kept, followed by
    /// the summary line.
    pub fn simulation(report: &SimReport) -> Self {
        let mut lines = Vec::new();
        let mut mismatches_seen = 0;
        let mut summary = None;
        for line in report.raw_output.lines() {
            let line = line.trim();
            match crate::toolchain::classify_line(line) {
                crate::toolchain::LineKind::Passed => lines.push(line),
                crate::toolchain::LineKind::Mismatch => {
                    mismatches_seen += 1;
                    if mismatches_seen <= MAX_MISMATCH_LINES {
                        lines.push(line);
                    }
                }
                crate::toolchain::LineKind::Summary => summary = Some(line),
                crate::toolchain::LineKind::AllPassed | crate::toolchain::LineKind::Other => {}
            }
        }
        let mut text = lines.join("\n");
        let summary_line = summary.map(str::to_string).unwrap_or_else(|| {
            format!(
                "{} mismatches out of {} total tests.",
                report.mismatch_count, report.total_tests
            )
        });
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&summary_line);
        let omitted = mismatches_seen.saturating_sub(MAX_MISMATCH_LINES);
        let truncated = omitted > 0;
        if truncated {
            text.push('\n');
            text.push_str(&omitted_line(omitted, "mismatch lines"));
        }
        Self {
            kind: FeedbackKind::SimulationFailure,
            tool_text: text,
            truncated,
        }
    }

    /// Simulation that did not finish normally (timeout, crash, no summary).
    pub fn simulation_fault(note: &str, partial_output: &str) -> Self {
        let mut text = partial_output.trim_end().to_string();
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(note);
        let (tool_text, truncated) = cap_text(&text);
        Self {
            kind: FeedbackKind::SimulationFailure,
            tool_text,
            truncated,
        }
    }

    pub fn parse_failure() -> Self {
        Self {
            kind: FeedbackKind::ParseFailure,
            tool_text: "The response did not contain a Verilog module (no `module` ... `endmodule` block was found).".into(),
            truncated: false,
        }
    }

    /// The user message asking the model to repair its previous response.
    pub fn render_request(&self) -> String {
        format!(
            "{}\n{}\n```\n{}\n```",
            self.kind.label(),
            RECTIFY_INSTRUCTION,
            self.tool_text
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("message history is empty")]
    EmptyHistory,
    #[error("message history must start with a system message followed by the design prompt")]
    MalformedHistory,
    #[error("previous response is empty")]
    EmptyResponse,
}

/// Messages for the zero-shot generation: system prompt then design prompt.
pub fn initial_messages(problem: &Problem) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(system_prompt()),
        ChatMessage::user(problem.design_prompt.clone()),
    ]
}

/// Messages for the next feedback round.
pub fn next_messages(
    strategy: ContextStrategy,
    history: &[ChatMessage],
    last_response: &str,
    feedback: &FeedbackPayload,
) -> Result<Vec<ChatMessage>, PromptError> {
    if history.is_empty() {
        return Err(PromptError::EmptyHistory);
    }
    if history.len() < 2 || history[0].role != Role::System || history[1].role != Role::User {
        return Err(PromptError::MalformedHistory);
    }
    if last_response.is_empty() {
        return Err(PromptError::EmptyResponse);
    }
    let tail = [
        ChatMessage::assistant(last_response),
        ChatMessage::user(feedback.render_request()),
    ];
    let mut out = match strategy {
        ContextStrategy::Succinct => history[..2].to_vec(),
        ContextStrategy::FullContext => history.to_vec(),
    };
    out.extend(tail);
    Ok(out)
}

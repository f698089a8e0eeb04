//! Deterministic backend that replays canned responses in order.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use super::{estimate_message_tokens, estimate_tokens, LlmError, LlmResponse, ModelConfig, TokenSource, Transport};
use crate::prompt::ChatMessage;

/// Separator line between responses in a single-file script.
pub const RESPONSE_SEPARATOR: &str = "===RESPONSE===";

/// Script location for one problem: `<base>/<id>/`, then `<base>/<id>.txt`,
/// then `<base>` itself.
pub fn resolve_script(base: &Path, problem_id: &str) -> PathBuf {
    let dir = base.join(problem_id);
    if dir.is_dir() {
        return dir;
    }
    let file = base.join(format!("{problem_id}.txt"));
    if file.is_file() {
        return file;
    }
    base.to_path_buf()
}

#[derive(Debug, Clone)]
pub struct ScriptedTransport {
    path: PathBuf,
    queue: VecDeque<String>,
}

impl ScriptedTransport {
    pub fn new(path: impl Into<PathBuf>, responses: impl IntoIterator<Item = String>) -> Self {
        Self {
            path: path.into(),
            queue: responses.into_iter().collect(),
        }
    }

    /// Load a directory of `*.txt` files (taken in name order) or a single
    /// file split on [`RESPONSE_SEPARATOR`] lines.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let err = |reason: String| LlmError::Script {
            path: path.to_path_buf(),
            reason,
        };
        let responses = if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| err(e.to_string()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            files
                .iter()
                .map(|f| fs::read_to_string(f).map_err(|e| err(format!("{}: {e}", f.display()))))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
            split_responses(&text)
        };
        Ok(Self::new(path, responses))
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

fn split_responses(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        if line.trim_end() == RESPONSE_SEPARATOR {
            out.push(current.join("\n"));
            current.clear();
        } else {
            current.push(line);
        }
    }
    out.push(current.join("\n"));
    // A leading separator does not introduce an empty response.
    if text.lines().next().is_some_and(|l| l.trim_end() == RESPONSE_SEPARATOR) {
        out.remove(0);
    }
    out
}

impl Transport for ScriptedTransport {
    fn send(&mut self, _config: &ModelConfig, messages: &[ChatMessage]) -> Result<LlmResponse, LlmError> {
        let text = self.queue.pop_front().ok_or_else(|| LlmError::ScriptExhausted {
            path: self.path.clone(),
        })?;
        Ok(LlmResponse {
            input_tokens: estimate_message_tokens(messages),
            output_tokens: estimate_tokens(&text),
            text,
            token_source: TokenSource::Approximated,
        })
    }
}

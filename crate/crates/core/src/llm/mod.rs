//! Chat-completion gateway: model configuration, backends and accounting.
//!
//! Every backend sits behind [`ModelClient`], which performs the pre-flight
//! checks (message shape, context limit) and records usage in a shared
//! [`CostLedger`].

mod http;
mod ledger;
mod registry;
mod scripted;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{ChatMessage, Role};

pub use http::HttpTransport;
pub use ledger::{ledger_cost, CostLedger, Dollars, Rate, Usage};
pub use registry::{ModelRegistry, RegistryError, SCRIPTED_PREFIX};
pub use scripted::{resolve_script, ScriptedTransport, RESPONSE_SEPARATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    HttpChat,
    /// Prompt-in, text-out endpoint. Only usable for zero-shot generation.
    HttpCompletion,
    Scripted,
}

fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}
fn default_true() -> bool {
    true
}
fn default_request_timeout() -> u64 {
    120
}
fn default_retry_backoff() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub backend: Backend,
    /// Provider-side model identifier; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_headers: BTreeMap<String, String>,
    /// Whether the provider accepts a `system` role message.
    #[serde(default = "default_true")]
    pub system_role: bool,
    pub max_tokens: u64,
    pub input_rate: Rate,
    pub output_rate: Rate,
    /// Passed through verbatim into the request body.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sampling: BTreeMap<String, serde_json::Value>,
    /// Script directory or file for the scripted backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_secs: u64,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_retry_backoff")]
    pub retry_backoff_ms: u64,
}

impl ModelConfig {
    /// A scripted model with zero rates reading from `script`.
    pub fn scripted(name: impl Into<String>, script: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            backend: Backend::Scripted,
            model_id: None,
            endpoint: None,
            api_key_env: None,
            auth_header: default_auth_header(),
            auth_prefix: default_auth_prefix(),
            extra_headers: BTreeMap::new(),
            system_role: true,
            max_tokens: 1 << 20,
            input_rate: Rate::ZERO,
            output_rate: Rate::ZERO,
            sampling: BTreeMap::new(),
            script: Some(script.into()),
            request_timeout_secs: default_request_timeout(),
            retry_backoff_ms: default_retry_backoff(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("model name is empty".into());
        }
        if self.max_tokens == 0 {
            return Err(format!("{}: max_tokens must be positive", self.name));
        }
        match self.backend {
            Backend::HttpChat | Backend::HttpCompletion if self.endpoint.is_none() => {
                Err(format!("{}: http backends need an endpoint", self.name))
            }
            Backend::Scripted if self.script.is_none() => {
                Err(format!("{}: scripted backend needs a script path", self.name))
            }
            _ => Ok(()),
        }
    }

    pub fn provider_model(&self) -> &str {
        self.model_id.as_deref().unwrap_or(&self.name)
    }

    /// Whether the model can take part in multi-turn feedback.
    pub fn supports_chat(&self) -> bool {
        self.backend != Backend::HttpCompletion
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenSource {
    ProviderReported,
    Approximated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    /// May be empty if the provider returned empty content.
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub token_source: TokenSource,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt needs ~{estimated} tokens but the context limit is {limit}")]
    ContextOverflow { estimated: u64, limit: u64 },
    #[error("credential variable {var} is not set")]
    AuthMissing { var: String },
    #[error("provider returned {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("script {path} has no responses left")]
    ScriptExhausted { path: PathBuf },
    #[error("cannot read script {path}: {reason}")]
    Script { path: PathBuf, reason: String },
    #[error("invalid messages: {0}")]
    InvalidMessages(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

impl LlmError {
    /// Faults in setup rather than in a single call.
    pub fn is_config_fault(&self) -> bool {
        matches!(
            self,
            LlmError::AuthMissing { .. } | LlmError::Config(_) | LlmError::Script { .. }
        )
    }
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn estimate_message_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

/// Adapt messages for a provider. Without a native system role the system
/// message is folded into the first user message.
pub fn map_roles(messages: &[ChatMessage], system_role: bool) -> Vec<ChatMessage> {
    if system_role || messages.first().map(|m| m.role) != Some(Role::System) {
        return messages.to_vec();
    }
    let system = &messages[0].content;
    let mut out: Vec<ChatMessage> = messages[1..].to_vec();
    match out.iter_mut().find(|m| m.role == Role::User) {
        Some(first_user) => first_user.content = format!("{system}\n\n{}", first_user.content),
        None => out.insert(0, ChatMessage::user(system.clone())),
    }
    out
}

/// Single prompt for completion-only models.
pub fn completion_prompt(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// A backend that turns messages into one response.
pub trait Transport: Send {
    fn send(&mut self, config: &ModelConfig, messages: &[ChatMessage]) -> Result<LlmResponse, LlmError>;
}

/// What the feedback loop talks to.
pub trait ChatModel: Send {
    fn config(&self) -> &ModelConfig;
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<LlmResponse, LlmError>;
}

pub struct ModelClient {
    config: ModelConfig,
    transport: Box<dyn Transport>,
    ledger: Arc<CostLedger>,
}

impl ModelClient {
    pub fn new(config: ModelConfig, transport: Box<dyn Transport>, ledger: Arc<CostLedger>) -> Self {
        Self { config, transport, ledger }
    }

    /// Build the client for one attempt on `problem_id`. Scripted models
    /// resolve their script per problem.
    pub fn for_problem(
        config: &ModelConfig,
        problem_id: &str,
        ledger: Arc<CostLedger>,
    ) -> Result<Self, LlmError> {
        config.validate().map_err(LlmError::Config)?;
        let transport: Box<dyn Transport> = match config.backend {
            Backend::Scripted => {
                let base = config.script.as_ref().expect("validated");
                Box::new(ScriptedTransport::load(&resolve_script(base, problem_id))?)
            }
            Backend::HttpChat | Backend::HttpCompletion => Box::new(HttpTransport::new(config)?),
        };
        Ok(Self::new(config.clone(), transport, ledger))
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }
}

impl ChatModel for ModelClient {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<LlmResponse, LlmError> {
        match messages.first() {
            None => return Err(LlmError::InvalidMessages("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(LlmError::InvalidMessages("first message must be the system prompt".into()))
            }
            _ => {}
        }
        let estimated = estimate_message_tokens(messages);
        if estimated >= self.config.max_tokens {
            return Err(LlmError::ContextOverflow {
                estimated,
                limit: self.config.max_tokens,
            });
        }
        let response = self.transport.send(&self.config, messages)?;
        self.ledger
            .record(&self.config.name, response.input_tokens, response.output_tokens);
        Ok(response)
    }
}

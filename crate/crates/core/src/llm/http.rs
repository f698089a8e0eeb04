//! Chat-completions style HTTP backend.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Map, Value};
use tracing::warn;

use super::{
    completion_prompt, estimate_message_tokens, estimate_tokens, map_roles, Backend, LlmError,
    LlmResponse, ModelConfig, TokenSource, Transport,
};
use crate::prompt::ChatMessage;

pub const MAX_RETRIES: u32 = 3;

pub struct HttpTransport {
    client: Client,
}

impl HttpTransport {
    pub fn new(config: &ModelConfig) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(config.request_timeout())
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self { client })
    }
}

fn credential(config: &ModelConfig) -> Result<Option<String>, LlmError> {
    let Some(var) = &config.api_key_env else {
        return Ok(None);
    };
    match std::env::var(var) {
        Ok(v) if !v.is_empty() => Ok(Some(v)),
        _ => Err(LlmError::AuthMissing { var: var.clone() }),
    }
}

fn request_body(config: &ModelConfig, messages: &[ChatMessage]) -> Value {
    let mut body = Map::new();
    body.insert("model".into(), json!(config.provider_model()));
    match config.backend {
        Backend::HttpCompletion => {
            body.insert("prompt".into(), json!(completion_prompt(messages)));
        }
        _ => {
            let mapped = map_roles(messages, config.system_role);
            body.insert("messages".into(), json!(mapped));
        }
    }
    for (k, v) in &config.sampling {
        body.insert(k.clone(), v.clone());
    }
    Value::Object(body)
}

fn usage_field(usage: &Value, names: &[&str]) -> Option<u64> {
    names.iter().find_map(|n| usage.get(*n).and_then(Value::as_u64))
}

fn parse_response(
    config: &ModelConfig,
    messages: &[ChatMessage],
    body: &Value,
) -> Result<LlmResponse, LlmError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::ProviderError {
            status: 200,
            body: format!("response has no choices: {body}"),
        })?;
    let text = match config.backend {
        Backend::HttpCompletion => choice.get("text"),
        _ => choice.get("message").and_then(|m| m.get("content")),
    }
    .and_then(Value::as_str)
    .unwrap_or_default()
    .to_string();

    let usage = body.get("usage").unwrap_or(&Value::Null);
    let reported = (
        usage_field(usage, &["prompt_tokens", "input_tokens"]),
        usage_field(usage, &["completion_tokens", "output_tokens"]),
    );
    Ok(match reported {
        (Some(input_tokens), Some(output_tokens)) => LlmResponse {
            text,
            input_tokens,
            output_tokens,
            token_source: TokenSource::ProviderReported,
        },
        _ => LlmResponse {
            input_tokens: estimate_message_tokens(messages),
            output_tokens: estimate_tokens(&text),
            text,
            token_source: TokenSource::Approximated,
        },
    })
}

fn is_transient(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

impl Transport for HttpTransport {
    fn send(&mut self, config: &ModelConfig, messages: &[ChatMessage]) -> Result<LlmResponse, LlmError> {
        let key = credential(config)?;
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| LlmError::Config(format!("{}: no endpoint", config.name)))?;
        let body = request_body(config, messages);
        let backoff = Duration::from_millis(config.retry_backoff_ms);

        let mut attempt = 0;
        loop {
            let mut req = self.client.post(endpoint).json(&body);
            if let Some(key) = &key {
                req = req.header(config.auth_header.as_str(), format!("{}{key}", config.auth_prefix));
            }
            for (k, v) in &config.extra_headers {
                req = req.header(k.as_str(), v.as_str());
            }
            let failure = match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let status = resp.status().as_u16();
                    let value: Value = resp.json().map_err(|e| LlmError::ProviderError {
                        status,
                        body: format!("invalid JSON: {e}"),
                    })?;
                    return parse_response(config, messages, &value);
                }
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    let err = LlmError::ProviderError {
                        status: status.as_u16(),
                        body: text,
                    };
                    if !is_transient(status) {
                        return Err(err);
                    }
                    err
                }
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                    LlmError::Transport(e.to_string())
                }
                Err(e) => return Err(LlmError::Transport(e.to_string())),
            };
            if attempt >= MAX_RETRIES {
                return Err(failure);
            }
            let delay = backoff * 2u32.pow(attempt);
            warn!(model = %config.name, attempt, ?delay, error = %failure, "retrying request");
            thread::sleep(delay);
            attempt += 1;
        }
    }
}

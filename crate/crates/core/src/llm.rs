//! Blocking JSON-over-HTTP clients for chat-completion and embedding endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_URL: &str = "E2MAP_LLM_URL";
pub const ENV_MODEL: &str = "E2MAP_LLM_MODEL";
pub const ENV_KEY: &str = "E2MAP_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("unexpected backend response: {0}")]
    BadResponse(String),
    #[error("missing configuration: {0}")]
    NotConfigured(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Value,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: "system".into(), content: Value::String(text.into()) }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: "user".into(), content: Value::String(text.into()) }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: Value::String(text.into()) }
    }

    /// User turn carrying text followed by inline images given as data URLs.
    pub fn user_with_images(text: impl Into<String>, data_urls: &[String]) -> Self {
        let mut parts = vec![json!({"type": "text", "text": text.into()})];
        parts.extend(data_urls.iter().map(|u| json!({"type": "image_url", "image_url": {"url": u}})));
        Self { role: "user".into(), content: Value::Array(parts) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
}

impl LlmConfig {
    pub fn from_env(timeout: Duration) -> Result<Self, LlmError> {
        let base_url = std::env::var(ENV_URL).map_err(|_| LlmError::NotConfigured(ENV_URL))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::NotConfigured(ENV_MODEL))?;
        let api_key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        Ok(Self { base_url, model, api_key, timeout, retries: 1 })
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// Chat-completion client. Requests go to `{base_url}/chat/completions`.
#[derive(Debug, Clone)]
pub struct ChatClient {
    config: LlmConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: LlmConfig) -> Self {
        let agent = agent(config.timeout);
        Self { config, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Sends the conversation and returns the first choice's text.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0.0,
        });
        let mut last = LlmError::Unavailable("no attempt made".into());
        for attempt in 0..=self.config.retries {
            match self.post(&body) {
                Ok(v) => return extract_content(&v),
                Err(e) => {
                    log::warn!("chat request attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(last)
    }

    fn post(&self, body: &Value) -> Result<Value, LlmError> {
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let response = req.send_json(body).map_err(|e| LlmError::Unavailable(e.to_string()))?;
        response
            .into_body()
            .read_json::<Value>()
            .map_err(|e| LlmError::BadResponse(e.to_string()))
    }
}

fn extract_content(v: &Value) -> Result<String, LlmError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
}

/// Embedding endpoint client: POST `{"texts": [...]}` to the configured URL,
/// expecting `{"embeddings": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embeddings: Vec<Vec<f64>>,
}

impl EmbeddingClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self { url: url.into(), agent: agent(timeout) }
    }

    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, LlmError> {
        let response = self
            .agent
            .post(&self.url)
            .send_json(json!({ "texts": texts }))
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        let parsed: EmbeddingResponse = response
            .into_body()
            .read_json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(LlmError::BadResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.embeddings.len()
            )));
        }
        Ok(parsed.embeddings)
    }
}

//! OpenAI-compatible HTTP provider.
//!
//! Speaks `/chat/completions` and `/embeddings` with bearer-token
//! auth. Every outbound request increments [`network_calls_total`],
//! which tests use to prove that stub-backed runs touch the network
//! zero times.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ModelRequest, Provider, ProviderError};

static NETWORK_CALLS: AtomicU64 = AtomicU64::new(0);

/// Total HTTP requests issued by all [`HttpProvider`]s in this
/// process.
pub fn network_calls_total() -> u64 {
    NETWORK_CALLS.load(Ordering::Relaxed)
}

/// Connection settings for an OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    /// Base URL without a trailing slash, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the API key; never stored in
    /// config files or artifacts.
    pub api_key_env: String,
    /// Model used for `/embeddings`; defaults to `model_name`.
    pub embed_model_name: Option<String>,
    pub embed_dim: usize,
    pub timeout: Duration,
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(format!("client construction: {e}")))?;
        Ok(HttpProvider { config, client })
    }

    fn api_key(&self) -> Result<String, ProviderError> {
        std::env::var(&self.config.api_key_env).map_err(|_| {
            ProviderError::Auth(format!(
                "API key environment variable {} is not set",
                self.config.api_key_env
            ))
        })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let key = self.api_key()?;
        NETWORK_CALLS.fetch_add(1, Ordering::Relaxed);
        let url = format!("{}{path}", self.config.base_url.trim_end_matches('/'));
        let response = self
            .client
            .post(url)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::Auth(format!("provider returned {status}")));
        }
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited(format!("provider returned {status}")));
        }
        if status.is_server_error() {
            return Err(ProviderError::Transport(format!("provider returned {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Malformed(format!("provider returned {status}")));
        }
        response.json().map_err(|e| ProviderError::Malformed(format!("invalid JSON body: {e}")))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl Provider for HttpProvider {
    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": req.model_name,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [{"role": "user", "content": req.prompt}],
        });
        let value = self.post("/chat/completions", body)?;
        let parsed: ChatResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::Malformed(format!("chat completion shape: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("chat completion had no choices".into()))
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let model =
            self.config.embed_model_name.clone().unwrap_or_else(|| self.config.model_name.clone());
        let body = json!({ "model": model, "input": text });
        let value = self.post("/embeddings", body)?;
        let parsed: EmbeddingResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::Malformed(format!("embedding shape: {e}")))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| ProviderError::Malformed("embedding response had no data".into()))
    }
}

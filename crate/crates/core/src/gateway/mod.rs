//! Model gateway: one completion/embedding interface over providers.
//!
//! A [`Gateway`] wraps a [`Provider`] (the deterministic offline
//! [`StubProvider`](stub::StubProvider) or the OpenAI-compatible
//! [`HttpProvider`](http::HttpProvider)) with a content-hash file cache,
//! a token-bucket rate limiter, and exponential-backoff retries for
//! transient failures. Cache keys cover model name, role, temperature,
//! token limit, and prompt, so a judge request can never be served a
//! cached entry from a different model.

pub mod cache;
pub mod http;
pub mod limiter;
pub mod stub;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::FileCache;
pub use limiter::TokenBucket;
pub use stub::StubProvider;

// ── requests ────────────────────────────────────────────────────────

/// What a completion is for; selects prompt handling and temperature
/// policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SummarizeMethod,
    SummarizeFile,
    Feature,
    Epic,
    Judge,
    Tiebreak,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::SummarizeMethod => "summarize_method",
            Role::SummarizeFile => "summarize_file",
            Role::Feature => "feature",
            Role::Epic => "epic",
            Role::Judge => "judge",
            Role::Tiebreak => "tiebreak",
        }
    }

    /// Judge and tiebreak completions always run at temperature 0.
    pub fn forces_zero_temperature(self) -> bool {
        matches!(self, Role::Judge | Role::Tiebreak)
    }
}

/// One completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub model_name: String,
}

impl ModelRequest {
    /// Builds a request, forcing temperature 0 for judge/tiebreak roles.
    ///
    /// # Panics
    /// Panics when `temperature` lies outside `[0, 2]`.
    pub fn new(
        role: Role,
        prompt: impl Into<String>,
        temperature: f64,
        max_tokens: usize,
        model_name: impl Into<String>,
    ) -> Self {
        assert!(
            (0.0..=2.0).contains(&temperature),
            "temperature {temperature} outside [0, 2]"
        );
        ModelRequest {
            role,
            prompt: prompt.into(),
            temperature: if role.forces_zero_temperature() { 0.0 } else { temperature },
            max_tokens,
            model_name: model_name.into(),
        }
    }
}

// ── errors ──────────────────────────────────────────────────────────

/// Provider-side failure, before retry/cache handling.
#[derive(Debug, Clone, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        matches!(self, ProviderError::RateLimited(_) | ProviderError::Transport(_))
    }
}

/// Gateway-level failure after cache, limiter, and retries.
#[derive(Debug, Error)]
pub enum GatewayError {
    /// Credentials rejected or missing — fatal, retrying cannot help.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Still rate limited after the retry budget.
    #[error("rate limited after {retries} retries: {message}")]
    RateLimited { message: String, retries: u32 },
    /// Transport kept failing after the retry budget.
    #[error("transport failure after {retries} retries: {message}")]
    Transport { message: String, retries: u32 },
    /// The provider answered, but not in a usable shape.
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    /// The response cache could not be read or written.
    #[error("cache failure: {0}")]
    Cache(String),
}

// ── provider abstraction ────────────────────────────────────────────

/// A completion + embedding backend.
pub trait Provider: Send + Sync {
    /// Default model identifier (used when requests leave it empty).
    fn model_name(&self) -> &str;
    /// Embedding dimensionality this provider returns.
    fn embed_dim(&self) -> usize;
    fn complete(&self, req: &ModelRequest) -> Result<String, ProviderError>;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Retry policy for transient provider failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, backoff_base: Duration::from_millis(200) }
    }
}

/// Call counters, observable for tests and logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub completions: u64,
    pub cache_hits: u64,
    pub retries: u64,
}

// ── gateway ─────────────────────────────────────────────────────────

/// The shared entry point for all model traffic.
pub struct Gateway {
    provider: Box<dyn Provider>,
    cache: Option<FileCache>,
    limiter: Option<TokenBucket>,
    retry: RetryPolicy,
    completions: AtomicU64,
    cache_hits: AtomicU64,
    retries: AtomicU64,
}

impl Gateway {
    /// Offline deterministic gateway: stub provider, no cache, no
    /// limiter. Never touches the network.
    pub fn stub() -> Self {
        Gateway::new(Box::new(stub::StubProvider::default()), None, None, RetryPolicy::default())
    }

    pub fn new(
        provider: Box<dyn Provider>,
        cache: Option<FileCache>,
        limiter: Option<TokenBucket>,
        retry: RetryPolicy,
    ) -> Self {
        Gateway {
            provider,
            cache,
            limiter,
            retry,
            completions: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        }
    }

    pub fn provider_model_name(&self) -> &str {
        self.provider.model_name()
    }

    pub fn embed_dim(&self) -> usize {
        self.provider.embed_dim()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            completions: self.completions.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
        }
    }

    /// Completes a request: cache first, then the provider with
    /// backoff retries on transient failures.
    pub fn complete(&self, req: &ModelRequest) -> Result<String, GatewayError> {
        let key = completion_cache_key(req);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hit);
            }
        }
        let text = self.with_retries(|| self.provider.complete(req))?;
        self.completions.fetch_add(1, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.put(&key, &text).map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        Ok(text)
    }

    /// Embeds text into a unit vector of the provider's dimension.
    /// Remote vectors are renormalized; results are cached like
    /// completions.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        let key = embedding_cache_key(self.provider.model_name(), self.provider.embed_dim(), text);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return serde_json::from_str(&hit)
                    .map_err(|e| GatewayError::Cache(format!("unreadable cached vector: {e}")));
            }
        }
        let mut vector = self.with_retries(|| self.provider.embed(text))?;
        if vector.len() != self.provider.embed_dim() {
            return Err(GatewayError::MalformedResponse(format!(
                "embedding of length {} (expected {})",
                vector.len(),
                self.provider.embed_dim()
            )));
        }
        crate::embed::normalize(&mut vector);
        self.completions.fetch_add(1, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            let json = serde_json::to_string(&vector)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
            cache.put(&key, &json).map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        Ok(vector)
    }

    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, GatewayError> {
        let mut attempt: u32 = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match call() {
                Ok(value) => return Ok(value),
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(self.retry.backoff_base * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(match e {
                        ProviderError::Auth(m) => GatewayError::Auth(m),
                        ProviderError::RateLimited(m) => {
                            GatewayError::RateLimited { message: m, retries: attempt }
                        }
                        ProviderError::Transport(m) => {
                            GatewayError::Transport { message: m, retries: attempt }
                        }
                        ProviderError::Malformed(m) => GatewayError::MalformedResponse(m),
                    })
                }
            }
        }
    }
}

/// Cache key for completions: hash of model, role, temperature, token
/// limit, and prompt. Distinct inputs get distinct keys at SHA-256
/// strength.
pub fn completion_cache_key(req: &ModelRequest) -> String {
    sha256_hex(
        format!(
            "{}\n{}\n{}\n{}\n{}",
            req.model_name,
            req.role.as_str(),
            req.temperature,
            req.max_tokens,
            req.prompt
        )
        .as_bytes(),
    )
}

/// Cache key for embeddings.
pub fn embedding_cache_key(model_name: &str, dim: usize, text: &str) -> String {
    sha256_hex(format!("{model_name}\nembed\n{dim}\n{text}").as_bytes())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

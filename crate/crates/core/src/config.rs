//! Run configuration: one TOML file with a section per pipeline
//! stage. Every field has the shipped default, so an empty file is a
//! valid configuration, and the whole struct hashes canonically
//! (sorted JSON keys) so manifests can detect config drift.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::sha256_bytes;
use crate::cluster::{
    BlendVariant, ClusterLevels, GridSpec, HierarchyConfig, ScoreCoefficients,
};
use crate::eval::TraceStrictness;
use crate::feature_doc::DocgenOptions;
use crate::gateway::http::{HttpProvider, HttpProviderConfig};
use crate::gateway::{FileCache, Gateway, RetryPolicy, StubProvider, TokenBucket};
use crate::summarize::SummarizeOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// `[provider]` — model endpoint, credentials, and traffic shaping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// `"stub"` for the offline deterministic provider, `"http"` for
    /// an OpenAI-compatible endpoint.
    pub name: String,
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the API key. The key itself never
    /// appears in config or artifacts.
    pub api_key_env: String,
    /// Embedding model; empty means `model_name`.
    pub embed_model_name: String,
    pub embed_dim: usize,
    /// Worker threads for model-bound loops; 0 = library default.
    pub parallelism: usize,
    /// Requests per second; 0 disables rate limiting.
    pub requests_per_second: f64,
    /// Burst capacity of the rate limiter.
    pub burst: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Sampling temperature for generation roles.
    pub temperature: f64,
    /// Judge and tiebreak temperature; must be 0 for reproducible
    /// verdicts.
    pub judge_temperature: f64,
    pub max_tokens: usize,
    /// Cache completions and embeddings under `<artifacts>/cache/`.
    pub cache: bool,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            name: "stub".into(),
            base_url: String::new(),
            model_name: "stub".into(),
            api_key_env: "REPOSUM_API_KEY".into(),
            embed_model_name: String::new(),
            embed_dim: 256,
            parallelism: 0,
            requests_per_second: 0.0,
            burst: 1.0,
            timeout_secs: 30,
            max_retries: 3,
            backoff_base_ms: 200,
            temperature: 0.2,
            judge_temperature: 0.0,
            max_tokens: 512,
            cache: true,
        }
    }
}

/// `[summarize]` — phase 2 knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeConfig {
    /// Context-window budget in estimated tokens for file prompts.
    pub window_budget: usize,
    /// Extra attempts after a malformed reply before degrading.
    pub max_output_retries: u32,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        SummarizeConfig { window_budget: 4000, max_output_retries: 2 }
    }
}

/// `[cluster]` — phase 3 knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Adjacency weight in the blend; similarity gets `1 − alpha`.
    pub alpha: f64,
    /// Sparsity threshold on blended weights.
    pub tau: f64,
    pub variant: BlendVariant,
    pub levels: ClusterLevels,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub grid_points: usize,
    /// Seed restarts per γ.
    pub restarts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        ClusterConfig {
            alpha: 0.5,
            tau: 0.05,
            variant: BlendVariant::Blended,
            levels: ClusterLevels::Hierarchical,
            gamma_min: grid.gamma_min,
            gamma_max: grid.gamma_max,
            grid_points: grid.points,
            restarts: 5,
        }
    }
}

impl ClusterConfig {
    pub fn to_hierarchy_config(&self) -> HierarchyConfig {
        HierarchyConfig {
            alpha: self.alpha,
            tau: self.tau,
            variant: self.variant,
            levels: self.levels,
            grid: GridSpec {
                gamma_min: self.gamma_min,
                gamma_max: self.gamma_max,
                points: self.grid_points,
            },
            restarts: self.restarts,
            coefficients: ScoreCoefficients::default(),
        }
    }
}

/// `[eval]` — judging and scoring knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// k values for Link@k.
    pub k_list: Vec<usize>,
    /// Candidate features retrieved per ground-truth feature.
    pub retrieval_k: usize,
    pub strictness: TraceStrictness,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_list: vec![1, 2, 3],
            retrieval_k: 5,
            strictness: TraceStrictness::RelevantFeature,
        }
    }
}

/// `[pipeline]` — cross-phase settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Global seed, recorded in the manifest. Component seeds (leiden
    /// restart seeds `1..=K`) are part of the tuning contract and do
    /// not move with it.
    pub seed: u64,
    /// Language profile for the analyze phase.
    pub lang: String,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection { seed: 42, lang: "java".into() }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub provider: ProviderConfig,
    pub summarize: SummarizeConfig,
    pub cluster: ClusterConfig,
    pub eval: EvalConfig,
    pub pipeline: PipelineSection,
}

impl PipelineConfig {
    /// Parses and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.provider;
        if p.name != "stub" && p.name != "http" {
            return Err(ConfigError::Invalid(format!(
                "provider.name must be \"stub\" or \"http\", got {:?}",
                p.name
            )));
        }
        if p.name == "http" && p.base_url.is_empty() {
            return Err(ConfigError::Invalid("provider.base_url required for http".into()));
        }
        if p.embed_dim == 0 {
            return Err(ConfigError::Invalid("provider.embed_dim must be positive".into()));
        }
        if !(0.0..=2.0).contains(&p.temperature) {
            return Err(ConfigError::Invalid(format!(
                "provider.temperature {} outside [0, 2]",
                p.temperature
            )));
        }
        if p.judge_temperature != 0.0 {
            return Err(ConfigError::Invalid(format!(
                "provider.judge_temperature must be 0 for reproducible verdicts, got {}",
                p.judge_temperature
            )));
        }
        if p.max_tokens == 0 {
            return Err(ConfigError::Invalid("provider.max_tokens must be positive".into()));
        }
        if p.requests_per_second < 0.0 || !p.requests_per_second.is_finite() {
            return Err(ConfigError::Invalid("provider.requests_per_second must be >= 0".into()));
        }
        let c = &self.cluster;
        if !(0.0..=1.0).contains(&c.alpha) {
            return Err(ConfigError::Invalid(format!("cluster.alpha {} outside [0, 1]", c.alpha)));
        }
        if !(0.0..=1.0).contains(&c.tau) {
            return Err(ConfigError::Invalid(format!("cluster.tau {} outside [0, 1]", c.tau)));
        }
        if c.gamma_min <= 0.0 || c.gamma_max < c.gamma_min {
            return Err(ConfigError::Invalid(format!(
                "cluster gamma range [{}, {}] is not a positive ascending interval",
                c.gamma_min, c.gamma_max
            )));
        }
        if c.grid_points < 2 {
            return Err(ConfigError::Invalid("cluster.grid_points must be at least 2".into()));
        }
        if c.restarts < 2 {
            return Err(ConfigError::Invalid("cluster.restarts must be at least 2".into()));
        }
        if self.summarize.window_budget == 0 {
            return Err(ConfigError::Invalid("summarize.window_budget must be positive".into()));
        }
        let e = &self.eval;
        if e.k_list.is_empty() || e.k_list.contains(&0) {
            return Err(ConfigError::Invalid("eval.k_list needs positive k values".into()));
        }
        if e.retrieval_k == 0 {
            return Err(ConfigError::Invalid("eval.retrieval_k must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON rendering: sorted keys, no whitespace variance.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config always serializes");
        serde_json::to_string(&value).expect("values always render")
    }

    /// Hash of [`canonical_json`](Self::canonical_json); recorded in
    /// manifests and rendered docs.
    pub fn config_hash(&self) -> String {
        sha256_bytes(self.canonical_json().as_bytes())
    }

    pub fn summarize_options(&self) -> SummarizeOptions {
        SummarizeOptions {
            model_name: self.provider.model_name.clone(),
            temperature: self.provider.temperature,
            max_tokens: self.provider.max_tokens,
            window_budget: self.summarize.window_budget,
            max_output_retries: self.summarize.max_output_retries,
        }
    }

    pub fn docgen_options(&self) -> DocgenOptions {
        DocgenOptions {
            model_name: self.provider.model_name.clone(),
            temperature: self.provider.temperature,
            max_tokens: self.provider.max_tokens,
            window_budget: self.summarize.window_budget,
            max_output_retries: self.summarize.max_output_retries,
        }
    }

    /// Builds the gateway this config describes. `cache_dir` hosts the
    /// completion cache when `provider.cache` is on.
    pub fn build_gateway(&self, cache_dir: Option<&Path>) -> Result<Gateway, ConfigError> {
        let p = &self.provider;
        let provider: Box<dyn crate::gateway::Provider> = match p.name.as_str() {
            "stub" => Box::new(StubProvider::with_dim(p.embed_dim)),
            "http" => Box::new(
                HttpProvider::new(HttpProviderConfig {
                    base_url: p.base_url.clone(),
                    model_name: p.model_name.clone(),
                    api_key_env: p.api_key_env.clone(),
                    embed_model_name: (!p.embed_model_name.is_empty())
                        .then(|| p.embed_model_name.clone()),
                    embed_dim: p.embed_dim,
                    timeout: Duration::from_secs(p.timeout_secs),
                })
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
            other => {
                return Err(ConfigError::Invalid(format!("unknown provider {other:?}")));
            }
        };
        let cache = match (p.cache, cache_dir) {
            (true, Some(dir)) => Some(FileCache::new(dir).map_err(|e| ConfigError::Io {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?),
            _ => None,
        };
        let limiter = TokenBucket::new(p.requests_per_second, p.burst.max(1.0));
        let retry = RetryPolicy {
            max_retries: p.max_retries,
            backoff_base: Duration::from_millis(p.backoff_base_ms),
        };
        Ok(Gateway::new(provider, cache, limiter, retry))
    }
}

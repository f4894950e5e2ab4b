//! Bottom-up summarization: methods first, then files, then semantic
//! similarity matrices over the summary embeddings.
//!
//! Method prompts carry the source and call-graph neighbor FQNs; file
//! prompts carry either the full source or, when the source exceeds
//! the context-window budget, a version with method bodies substituted
//! by their one-line summaries. Malformed model output is retried a
//! bounded number of times; after that the summary degrades to a
//! signature-derived description and is flagged, so a single bad reply
//! never sinks a pipeline run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{clamped_cosine, EmbedError, Embedder};
use crate::exec;
use crate::gateway::{Gateway, GatewayError, ModelRequest, Role};
use crate::repo_graph::{AdjacencyMatrix, FileNode, MethodNode, RepoModel};

pub use crate::repo_graph::AdjacencyLevel as MatrixLevel;

// ── similarity matrix ───────────────────────────────────────────────

/// Dense symmetric similarity matrix with unit diagonal; entries are
/// clamped cosines in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub level: MatrixLevel,
    pub n: usize,
    rows: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Builds an `n × n` matrix from `f`, consulted only for `i < j`;
    /// the mirror entry is copied and the diagonal is fixed at 1.
    pub fn from_fn(n: usize, level: MatrixLevel, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        SimilarityMatrix { level, n, rows }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    /// Checks symmetry, the unit diagonal, and the `[0, 1]` range.
    pub fn validate(&self) -> Result<(), String> {
        if self.rows.len() != self.n || self.rows.iter().any(|r| r.len() != self.n) {
            return Err(format!("similarity matrix is not {n}x{n}", n = self.n));
        }
        for i in 0..self.n {
            if (self.rows[i][i] - 1.0).abs() > 1e-12 {
                return Err(format!("diagonal entry ({i},{i}) is {}", self.rows[i][i]));
            }
            for j in 0..self.n {
                let v = self.rows[i][j];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(format!("entry ({i},{j}) = {v} outside [0,1]"));
                }
                if (v - self.rows[j][i]).abs() > 1e-12 {
                    return Err(format!("asymmetry at ({i},{j})"));
                }
            }
        }
        Ok(())
    }
}

// ── summaries ───────────────────────────────────────────────────────

/// How a file summary prompt was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// The raw source fit within the window budget.
    FullSource,
    /// Method bodies were replaced by their summary descriptions.
    MethodSummarySubstitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method_id: usize,
    pub description: String,
    pub workflow: Vec<String>,
    pub quality: String,
    pub embedding: Vec<f64>,
    /// True when the model reply stayed malformed through all retries
    /// and the description was derived from the signature instead.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSummary {
    pub file_id: usize,
    pub description: String,
    pub mode: SummaryMode,
    pub embedding: Vec<f64>,
    pub degraded: bool,
}

/// Everything the summarize phase produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeOutcome {
    pub methods: Vec<MethodSummary>,
    pub files: Vec<FileSummary>,
    pub sim_file: SimilarityMatrix,
    pub sim_method: SimilarityMatrix,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SummarizeOptions {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: usize,
    /// Context-window budget in estimated tokens for file prompts.
    pub window_budget: usize,
    /// Extra attempts after a malformed reply before degrading.
    pub max_output_retries: u32,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        SummarizeOptions {
            model_name: "stub".into(),
            temperature: 0.2,
            max_tokens: 512,
            window_budget: 4000,
            max_output_retries: 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("{got} source texts supplied for {expected} files")]
    SourceCount { expected: usize, got: usize },
    #[error("expected a method-level adjacency matrix, got {0:?}")]
    WrongLevel(MatrixLevel),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

// ── prompts and reply parsing ───────────────────────────────────────

fn method_prompt(method: &MethodNode, neighbors: &[&MethodNode], attempt: u32) -> String {
    let mut p = format!(
        "ROLE: summarize-method\nFQN: {}\nSPAN: {}-{}\n",
        method.fqn, method.span.0, method.span.1
    );
    for n in neighbors {
        p.push_str(&format!("RELATED: {}\n", n.fqn));
    }
    p.push_str(&format!("SOURCE:\n{}\n", method.source_text));
    p.push_str(
        "INSTRUCTIONS: Reply with a DESCRIPTION: line, a WORKFLOW: dash list, \
         and a QUALITY: line.",
    );
    if attempt > 0 {
        p.push_str(&format!("\nATTEMPT: {attempt}"));
    }
    p
}

fn file_prompt(file: &FileNode, source: &str, attempt: u32) -> String {
    let mut p = format!(
        "ROLE: summarize-file\nPATH: {}\nPACKAGE: {}\nSOURCE:\n{}\n\
         INSTRUCTIONS: Reply with a DESCRIPTION: line.",
        file.path, file.package, source
    );
    if attempt > 0 {
        p.push_str(&format!("\nATTEMPT: {attempt}"));
    }
    p
}

/// Parses `DESCRIPTION:` / `WORKFLOW:` / `QUALITY:` sections. Returns
/// `None` when the description is missing or empty.
fn parse_summary_reply(reply: &str) -> Option<(String, Vec<String>, String)> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Description,
        Workflow,
        Quality,
    }
    let mut section = Section::None;
    let mut description = String::new();
    let mut workflow = Vec::new();
    let mut quality = String::new();
    for line in reply.lines() {
        if let Some(rest) = line.strip_prefix("DESCRIPTION:") {
            section = Section::Description;
            description.push_str(rest.trim());
        } else if line.starts_with("WORKFLOW:") {
            section = Section::Workflow;
        } else if let Some(rest) = line.strip_prefix("QUALITY:") {
            section = Section::Quality;
            quality.push_str(rest.trim());
        } else {
            match section {
                Section::Description => {
                    if !line.trim().is_empty() {
                        if !description.is_empty() {
                            description.push(' ');
                        }
                        description.push_str(line.trim());
                    }
                }
                Section::Workflow => {
                    if let Some(step) = line.trim().strip_prefix("- ") {
                        if !step.trim().is_empty() {
                            workflow.push(step.trim().to_string());
                        }
                    }
                }
                Section::Quality => {
                    if !line.trim().is_empty() {
                        if !quality.is_empty() {
                            quality.push(' ');
                        }
                        quality.push_str(line.trim());
                    }
                }
                Section::None => {}
            }
        }
    }
    let description = description.trim().to_string();
    (!description.is_empty()).then_some((description, workflow, quality.trim().to_string()))
}

/// Requests a completion, re-prompting on malformed replies. Returns
/// `Ok(None)` when every attempt stayed malformed or the gateway kept
/// failing non-fatally; only authentication errors abort.
fn complete_with_output_retries(
    gateway: &Gateway,
    opts: &SummarizeOptions,
    role: Role,
    build_prompt: impl Fn(u32) -> String,
    parse: impl Fn(&str) -> bool,
) -> Result<Option<String>, GatewayError> {
    for attempt in 0..=opts.max_output_retries {
        let req = ModelRequest::new(
            role,
            build_prompt(attempt),
            opts.temperature,
            opts.max_tokens,
            opts.model_name.clone(),
        );
        match gateway.complete(&req) {
            Ok(reply) if parse(&reply) => return Ok(Some(reply)),
            Ok(_) => continue,
            Err(GatewayError::Auth(m)) => return Err(GatewayError::Auth(m)),
            Err(_) => return Ok(None),
        }
    }
    Ok(None)
}

// ── method summarization ────────────────────────────────────────────

/// Summarizes one method given its call-graph neighbors.
///
/// Bodiless declarations (interfaces, abstract methods) skip the model
/// and use a signature-derived description with an empty workflow.
/// Only authentication failures are returned as errors; everything
/// else degrades.
pub fn summarize_method(
    method: &MethodNode,
    neighbors: &[&MethodNode],
    gateway: &Gateway,
    opts: &SummarizeOptions,
) -> Result<MethodSummary, GatewayError> {
    let (description, workflow, quality, degraded) = if method.source_text.is_empty() {
        (
            format!("Declares {} without a body (signature only).", method.fqn),
            Vec::new(),
            String::new(),
            false,
        )
    } else {
        let reply = complete_with_output_retries(
            gateway,
            opts,
            Role::SummarizeMethod,
            |attempt| method_prompt(method, neighbors, attempt),
            |reply| parse_summary_reply(reply).is_some(),
        )?;
        match reply.as_deref().and_then(parse_summary_reply) {
            Some((d, w, q)) => (d, w, q, false),
            None => (
                format!("Summary unavailable for {}; derived from signature.", method.fqn),
                Vec::new(),
                String::new(),
                true,
            ),
        }
    };
    let embedding = gateway.embed(&description)?;
    Ok(MethodSummary {
        method_id: method.method_id,
        description,
        workflow,
        quality,
        embedding,
        degraded,
    })
}

// ── file summarization ──────────────────────────────────────────────

/// Replaces each method body in `source` with a comment holding its
/// summary description. Nested methods whose text was removed along
/// with an enclosing body are skipped silently.
fn substitute_method_summaries(source: &str, methods: &[(&MethodNode, &MethodSummary)]) -> String {
    let mut out = source.to_string();
    for (method, summary) in methods {
        if method.source_text.is_empty() {
            continue;
        }
        let replacement = format!("/* {} */", summary.description);
        out = out.replacen(&method.source_text, &replacement, 1);
    }
    out
}

/// Summarizes one file from its source and already-summarized methods.
///
/// The prompt uses the raw source exactly when its token estimate fits
/// `window_budget`; otherwise method bodies are substituted by their
/// summaries (`mode` records which happened).
pub fn summarize_file(
    file: &FileNode,
    source: &str,
    methods: &[(&MethodNode, &MethodSummary)],
    gateway: &Gateway,
    opts: &SummarizeOptions,
) -> Result<FileSummary, GatewayError> {
    let (mode, prompt_source) = if estimate_tokens(source) <= opts.window_budget {
        (SummaryMode::FullSource, source.to_string())
    } else {
        (SummaryMode::MethodSummarySubstitution, substitute_method_summaries(source, methods))
    };
    let reply = complete_with_output_retries(
        gateway,
        opts,
        Role::SummarizeFile,
        |attempt| file_prompt(file, &prompt_source, attempt),
        |reply| parse_summary_reply(reply).is_some(),
    )?;
    let (description, degraded) = match reply.as_deref().and_then(parse_summary_reply) {
        Some((d, _, _)) => (d, false),
        None => (format!("Summary unavailable for {}; derived from path.", file.path), true),
    };
    let embedding = gateway.embed(&description)?;
    Ok(FileSummary { file_id: file.file_id, description, mode, embedding, degraded })
}

// ── embeddings and similarity ───────────────────────────────────────

/// Embeds each text with the given embedder; any failure aborts.
pub fn embed_descriptions<E: Embedder + Sync>(
    texts: &[String],
    embedder: &E,
) -> Result<Vec<Vec<f64>>, EmbedError> {
    exec::try_map_vec(texts.to_vec(), |t| embedder.embed(&t))
}

/// Pairwise clamped-cosine matrix over unit vectors of equal length.
pub fn similarity_matrix(
    vectors: &[Vec<f64>],
    level: MatrixLevel,
) -> Result<SimilarityMatrix, EmbedError> {
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.len() != first.len() {
                return Err(EmbedError::DimensionMismatch { left: first.len(), right: v.len() });
            }
        }
    }
    Ok(SimilarityMatrix::from_fn(vectors.len(), level, |i, j| {
        clamped_cosine(&vectors[i], &vectors[j]).expect("dimensions checked above")
    }))
}

// ── repository-level orchestration ──────────────────────────────────

/// Summarizes every method and file of a model and builds both
/// similarity matrices. `sources[i]` is the full text of `files[i]`.
pub fn summarize_repository(
    model: &RepoModel,
    sources: &[String],
    adj_method: &AdjacencyMatrix,
    gateway: &Gateway,
    opts: &SummarizeOptions,
) -> Result<SummarizeOutcome, SummarizeError> {
    if sources.len() != model.files.len() {
        return Err(SummarizeError::SourceCount {
            expected: model.files.len(),
            got: sources.len(),
        });
    }
    if adj_method.level != MatrixLevel::Method {
        return Err(SummarizeError::WrongLevel(adj_method.level));
    }

    let mut neighbor_ids: Vec<Vec<usize>> = vec![Vec::new(); model.methods.len()];
    for (i, j) in adj_method.undirected_edges() {
        neighbor_ids[i].push(j);
        neighbor_ids[j].push(i);
    }
    for ids in &mut neighbor_ids {
        ids.sort_unstable();
    }

    let methods = exec::try_map_vec((0..model.methods.len()).collect(), |m| {
        let neighbors: Vec<&MethodNode> =
            neighbor_ids[m].iter().map(|&j| &model.methods[j]).collect();
        summarize_method(&model.methods[m], &neighbors, gateway, opts)
    })?;

    let files = exec::try_map_vec((0..model.files.len()).collect(), |f| {
        let members: Vec<(&MethodNode, &MethodSummary)> = model
            .methods
            .iter()
            .filter(|m| m.file_id == f)
            .map(|m| (m, &methods[m.method_id]))
            .collect();
        summarize_file(&model.files[f], &sources[f], &members, gateway, opts)
    })?;

    let mut warnings = Vec::new();
    for m in &methods {
        if m.degraded {
            warnings.push(format!(
                "degraded summary for method {}",
                model.methods[m.method_id].fqn
            ));
        }
    }
    for f in &files {
        if f.degraded {
            warnings.push(format!("degraded summary for file {}", model.files[f.file_id].path));
        }
    }

    let method_vectors: Vec<Vec<f64>> = methods.iter().map(|m| m.embedding.clone()).collect();
    let file_vectors: Vec<Vec<f64>> = files.iter().map(|f| f.embedding.clone()).collect();
    let sim_method = similarity_matrix(&method_vectors, MatrixLevel::Method)
        .expect("gateway embeddings share one dimension");
    let sim_file = similarity_matrix(&file_vectors, MatrixLevel::File)
        .expect("gateway embeddings share one dimension");

    Ok(SummarizeOutcome { methods, files, sim_file, sim_method, warnings })
}

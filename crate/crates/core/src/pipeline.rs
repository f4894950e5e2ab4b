//! Pipeline orchestration over a shared artifact directory.
//!
//! The four phases — analyze, summarize, cluster, docgen — each read
//! upstream artifacts plus config and write their own artifact files.
//! A run manifest records, per phase, a fingerprint (config subset,
//! input checksums, upstream fingerprints) and the output checksums;
//! a rerun skips any phase whose fingerprint and outputs are
//! unchanged, so mutating one knob reruns exactly the phases that
//! depend on it. One pipeline at a time per directory, enforced with
//! a lock file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::artifact::{
    self, read_json, sha256_bytes, write_json, ArtifactError, CLUSTERS_SCHEMA, FEATURES_SCHEMA,
    GRAPH_SCHEMA, MANIFEST_SCHEMA, MATRIX_SCHEMA, SUMMARIES_SCHEMA, TRACE_LINKS_SCHEMA,
};
use crate::cluster::{hierarchical_cluster, ClusterOutcome};
use crate::config::{ConfigError, PipelineConfig};
use crate::feature_doc::{
    render_documentation, DocumentTree, Epic, Feature, TraceLink,
};
use crate::repo_graph::{
    build_adjacency, parse_repository, AdjacencyLevel, AdjacencyMatrix, RepoModel,
};
use crate::summarize::{summarize_repository, FileSummary, MethodSummary, SimilarityMatrix};

pub const GRAPH_FILE: &str = "graph.json";
pub const SUMMARIES_FILE: &str = "summaries.json";
pub const MATRIX_FILE_FILE: &str = "ss_matrix.file.json";
pub const MATRIX_METHOD_FILE: &str = "ss_matrix.method.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const FEATURES_FILE: &str = "features.json";
pub const TRACE_LINKS_FILE: &str = "trace_links.json";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const DOCS_DIR: &str = "docs";
pub const CACHE_DIR: &str = "cache";
pub const LOCK_FILE: &str = ".reposum.lock";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("artifact directory {0} is locked by another run (remove {LOCK_FILE} if stale)")]
    Locked(String),
    #[error("{phase} requires {artifact}, which is missing; run the producing phase first")]
    MissingDependency { phase: Phase, artifact: String },
    #[error("{artifact} changed on disk since its producing phase ran (recorded {expected}, found {found})")]
    ChecksumMismatch { artifact: String, expected: String, found: String },
    #[error("{phase} failed: {message}")]
    Phase { phase: Phase, message: String },
    #[error("artifact validation failed:\n{}", violations.join("\n"))]
    SchemaViolation { violations: Vec<String> },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

// ── phases ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Analyze,
    Summarize,
    Cluster,
    Docgen,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Analyze, Phase::Summarize, Phase::Cluster, Phase::Docgen];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Analyze => "analyze",
            Phase::Summarize => "summarize",
            Phase::Cluster => "cluster",
            Phase::Docgen => "docgen",
        }
    }

    /// Artifact files this phase reads.
    fn inputs(self) -> &'static [&'static str] {
        match self {
            Phase::Analyze => &[],
            Phase::Summarize => &[GRAPH_FILE],
            Phase::Cluster => &[GRAPH_FILE, SUMMARIES_FILE, MATRIX_FILE_FILE, MATRIX_METHOD_FILE],
            Phase::Docgen => &[GRAPH_FILE, SUMMARIES_FILE, CLUSTERS_FILE],
        }
    }

    fn upstream(self) -> Option<Phase> {
        match self {
            Phase::Analyze => None,
            Phase::Summarize => Some(Phase::Analyze),
            Phase::Cluster => Some(Phase::Summarize),
            Phase::Docgen => Some(Phase::Cluster),
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which phases a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSelection {
    All,
    Only(Phase),
}

impl PhaseSelection {
    fn includes(self, phase: Phase) -> bool {
        match self {
            PhaseSelection::All => true,
            PhaseSelection::Only(p) => p == phase,
        }
    }
}

/// What happened to a phase in one invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Completed,
    Cached,
    Failed,
}

// ── manifest ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub status: PhaseStatus,
    /// Hash over the phase's config subset, input checksums, and the
    /// upstream phase's fingerprint.
    pub fingerprint: String,
    /// Input artifact → checksum at the time the phase ran.
    pub inputs: BTreeMap<String, String>,
    /// Output artifact → checksum as written.
    pub outputs: BTreeMap<String, String>,
    pub finished_unix: u64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub created_unix: u64,
    pub phases: BTreeMap<Phase, PhaseRecord>,
}

impl RunManifest {
    fn fresh(config_hash: String) -> Self {
        RunManifest {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: now_unix(),
            phases: BTreeMap::new(),
        }
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn load_manifest(dir: &Path) -> Result<Option<RunManifest>, ArtifactError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    read_json::<RunManifest>(&path, MANIFEST_SCHEMA).map(Some)
}

fn save_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), ArtifactError> {
    write_json(&dir.join(MANIFEST_FILE), MANIFEST_SCHEMA, manifest)?;
    Ok(())
}

// ── artifact payloads ───────────────────────────────────────────────

/// `graph.json`: the parsed model, the raw file sources (so later
/// phases need only the artifact directory), and both adjacency
/// matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphArtifact {
    pub model: RepoModel,
    /// Full text of each file, aligned with `model.files`.
    pub sources: Vec<String>,
    pub adj_file: AdjacencyMatrix,
    pub adj_method: AdjacencyMatrix,
    pub warnings: Vec<String>,
}

/// `summaries.json`: method and file summaries with embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummariesArtifact {
    pub model_name: String,
    pub methods: Vec<MethodSummary>,
    pub files: Vec<FileSummary>,
    pub warnings: Vec<String>,
}

/// `features.json`: features, epics, and the rendered document tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesArtifact {
    pub features: Vec<Feature>,
    pub epics: Vec<Epic>,
    pub tree: DocumentTree,
    pub warnings: Vec<String>,
}

// ── lock file ───────────────────────────────────────────────────────

/// Held for the duration of a pipeline run; removed on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                use std::io::Write as _;
                let _ = writeln!(file, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(PipelineError::Locked(dir.display().to_string()))
            }
            Err(e) => Err(PipelineError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ── fingerprints ────────────────────────────────────────────────────

/// Sorted-key JSON hash over everything that should trigger a rerun.
fn fingerprint(
    config_subset: serde_json::Value,
    inputs: &BTreeMap<String, String>,
    upstream_fingerprint: &str,
) -> String {
    let value = serde_json::json!({
        "config": config_subset,
        "inputs": inputs,
        "upstream": upstream_fingerprint,
    });
    sha256_bytes(serde_json::to_string(&value).expect("fingerprints always render").as_bytes())
}

/// The config fields each phase actually consumes; anything else can
/// change without busting that phase's cache.
fn phase_config_subset(config: &PipelineConfig, phase: Phase) -> serde_json::Value {
    match phase {
        Phase::Analyze => serde_json::json!({ "lang": config.pipeline.lang }),
        Phase::Summarize => serde_json::json!({
            "provider": provider_fingerprint(config),
            "summarize": config.summarize,
        }),
        Phase::Cluster => serde_json::to_value(&config.cluster).expect("serializable"),
        Phase::Docgen => serde_json::json!({
            "provider": provider_fingerprint(config),
            "summarize": config.summarize,
        }),
    }
}

/// Provider fields that change model output. Traffic shaping (rate
/// limits, retries, timeouts, parallelism, cache) deliberately does
/// not invalidate artifacts.
fn provider_fingerprint(config: &PipelineConfig) -> serde_json::Value {
    let p = &config.provider;
    serde_json::json!({
        "name": p.name,
        "model_name": p.model_name,
        "embed_model_name": p.embed_model_name,
        "embed_dim": p.embed_dim,
        "temperature": p.temperature,
        "max_tokens": p.max_tokens,
    })
}

/// Checksum of the source tree as the analyze phase would walk it:
/// sorted repo-relative paths and file contents.
pub fn source_tree_checksum(root: &Path) -> Result<String, PipelineError> {
    let mut paths: Vec<(String, PathBuf)> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || e.file_name().to_str().map(|s| !s.starts_with('.')).unwrap_or(false)
        })
        .filter_map(|entry| entry.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().extension().and_then(|x| x.to_str()) == Some("java"))
        .filter_map(|e| {
            let rel = e
                .path()
                .strip_prefix(root)
                .ok()?
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            Some((rel, e.path().to_path_buf()))
        })
        .collect();
    paths.sort();
    let mut hasher = Sha256::new();
    for (rel, full) in paths {
        let bytes = fs::read(&full).map_err(|e| PipelineError::Io {
            path: full.display().to_string(),
            message: e.to_string(),
        })?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update(&bytes);
        hasher.update([0u8]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

// ── run_pipeline ────────────────────────────────────────────────────

/// Per-invocation result: what each selected phase did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub statuses: BTreeMap<Phase, PhaseStatus>,
    pub manifest: RunManifest,
}

/// Runs the selected phases over `artifact_dir`, resuming where
/// fingerprints match. `repo_root` is only consulted by the analyze
/// phase; every later phase reads artifacts alone.
pub fn run_pipeline(
    config: &PipelineConfig,
    repo_root: &Path,
    artifact_dir: &Path,
    selection: PhaseSelection,
) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    fs::create_dir_all(artifact_dir).map_err(|e| PipelineError::Io {
        path: artifact_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let _lock = DirLock::acquire(artifact_dir)?;

    let config_hash = config.config_hash();
    let mut manifest = match load_manifest(artifact_dir) {
        Ok(Some(m)) => m,
        Ok(None) => RunManifest::fresh(config_hash.clone()),
        Err(e) => {
            log::warn!("unreadable manifest, starting fresh: {e}");
            RunManifest::fresh(config_hash.clone())
        }
    };
    manifest.config_hash = config_hash.clone();
    manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();

    let mut statuses = BTreeMap::new();
    for phase in Phase::ALL {
        if !selection.includes(phase) {
            continue;
        }
        // Inputs must exist whether we run or resume.
        for artifact in phase.inputs() {
            if !artifact_dir.join(artifact).exists() {
                return Err(PipelineError::MissingDependency {
                    phase,
                    artifact: (*artifact).to_string(),
                });
            }
        }
        let mut inputs = BTreeMap::new();
        for artifact in phase.inputs() {
            let checksum = artifact::sha256_file(&artifact_dir.join(artifact))?;
            inputs.insert((*artifact).to_string(), checksum);
        }
        // A consumed artifact must still be the one its producer wrote.
        if let Some(producer) = phase.upstream().and_then(|p| manifest.phases.get(&p)) {
            for (artifact, checksum) in &inputs {
                if let Some(expected) = producer.outputs.get(artifact) {
                    if expected != checksum {
                        return Err(PipelineError::ChecksumMismatch {
                            artifact: artifact.clone(),
                            expected: expected.clone(),
                            found: checksum.clone(),
                        });
                    }
                }
            }
        }

        let upstream_fp = phase
            .upstream()
            .and_then(|p| manifest.phases.get(&p))
            .map(|r| r.fingerprint.clone())
            .unwrap_or_default();
        let extra = if phase == Phase::Analyze {
            source_tree_checksum(repo_root)?
        } else {
            String::new()
        };
        let mut fp_inputs = inputs.clone();
        if !extra.is_empty() {
            fp_inputs.insert("source_tree".into(), extra);
        }
        let fp = fingerprint(phase_config_subset(config, phase), &fp_inputs, &upstream_fp);

        if let Some(record) = manifest.phases.get(&phase) {
            let outputs_intact = record.status == PhaseStatus::Completed
                && record.fingerprint == fp
                && record.outputs.iter().all(|(artifact, checksum)| {
                    artifact::sha256_file(&artifact_dir.join(artifact))
                        .map(|found| &found == checksum)
                        .unwrap_or(false)
                });
            if outputs_intact {
                log::info!("{phase}: cached");
                statuses.insert(phase, PhaseStatus::Cached);
                continue;
            }
        }

        log::info!("{phase}: running");
        let result = execute_phase(config, repo_root, artifact_dir, phase, &config_hash);
        match result {
            Ok((outputs, warnings)) => {
                manifest.phases.insert(
                    phase,
                    PhaseRecord {
                        status: PhaseStatus::Completed,
                        fingerprint: fp,
                        inputs,
                        outputs,
                        finished_unix: now_unix(),
                        warnings,
                        error: None,
                    },
                );
                // Downstream records are stale now; drop them so a
                // partial rerun cannot resume over mixed generations.
                let mut stale = phase;
                while let Some(next) = Phase::ALL.iter().copied().find(|p| p.upstream() == Some(stale)) {
                    manifest.phases.remove(&next);
                    stale = next;
                }
                save_manifest(artifact_dir, &manifest)?;
                statuses.insert(phase, PhaseStatus::Completed);
            }
            Err(e) => {
                manifest.phases.insert(
                    phase,
                    PhaseRecord {
                        status: PhaseStatus::Failed,
                        fingerprint: fp,
                        inputs,
                        outputs: BTreeMap::new(),
                        finished_unix: now_unix(),
                        warnings: Vec::new(),
                        error: Some(e.to_string()),
                    },
                );
                save_manifest(artifact_dir, &manifest)?;
                statuses.insert(phase, PhaseStatus::Failed);
                return Err(e);
            }
        }
    }
    save_manifest(artifact_dir, &manifest)?;
    Ok(PipelineOutcome { statuses, manifest })
}

type PhaseOutputs = (BTreeMap<String, String>, Vec<String>);

fn execute_phase(
    config: &PipelineConfig,
    repo_root: &Path,
    dir: &Path,
    phase: Phase,
    config_hash: &str,
) -> Result<PhaseOutputs, PipelineError> {
    let fail = |message: String| PipelineError::Phase { phase, message };
    match phase {
        Phase::Analyze => {
            let outcome = parse_repository(repo_root, &config.pipeline.lang)
                .map_err(|e| fail(e.to_string()))?;
            let sources: Vec<String> = outcome
                .model
                .files
                .iter()
                .map(|f| {
                    fs::read_to_string(repo_root.join(&f.path)).map_err(|e| {
                        fail(format!("rereading {}: {e}", f.path))
                    })
                })
                .collect::<Result<_, _>>()?;
            let adj_file = build_adjacency(&outcome.model, AdjacencyLevel::File);
            let adj_method = build_adjacency(&outcome.model, AdjacencyLevel::Method);
            let artifact = GraphArtifact {
                model: outcome.model,
                sources,
                adj_file,
                adj_method,
                warnings: outcome.warnings.clone(),
            };
            let checksum = write_json(&dir.join(GRAPH_FILE), GRAPH_SCHEMA, &artifact)?;
            Ok((BTreeMap::from([(GRAPH_FILE.to_string(), checksum)]), outcome.warnings))
        }
        Phase::Summarize => {
            let graph: GraphArtifact = read_json(&dir.join(GRAPH_FILE), GRAPH_SCHEMA)?;
            let gateway = config
                .build_gateway(config.provider.cache.then(|| dir.join(CACHE_DIR)).as_deref())?;
            let outcome = summarize_repository(
                &graph.model,
                &graph.sources,
                &graph.adj_method,
                &gateway,
                &config.summarize_options(),
            )
            .map_err(|e| fail(e.to_string()))?;
            let summaries = SummariesArtifact {
                model_name: config.provider.model_name.clone(),
                methods: outcome.methods,
                files: outcome.files,
                warnings: outcome.warnings.clone(),
            };
            let mut outputs = BTreeMap::new();
            outputs.insert(
                SUMMARIES_FILE.to_string(),
                write_json(&dir.join(SUMMARIES_FILE), SUMMARIES_SCHEMA, &summaries)?,
            );
            outputs.insert(
                MATRIX_FILE_FILE.to_string(),
                write_json(&dir.join(MATRIX_FILE_FILE), MATRIX_SCHEMA, &outcome.sim_file)?,
            );
            outputs.insert(
                MATRIX_METHOD_FILE.to_string(),
                write_json(&dir.join(MATRIX_METHOD_FILE), MATRIX_SCHEMA, &outcome.sim_method)?,
            );
            Ok((outputs, outcome.warnings))
        }
        Phase::Cluster => {
            let graph: GraphArtifact = read_json(&dir.join(GRAPH_FILE), GRAPH_SCHEMA)?;
            let sim_file: SimilarityMatrix =
                read_json(&dir.join(MATRIX_FILE_FILE), MATRIX_SCHEMA)?;
            let sim_method: SimilarityMatrix =
                read_json(&dir.join(MATRIX_METHOD_FILE), MATRIX_SCHEMA)?;
            let outcome = hierarchical_cluster(
                &graph.model,
                &graph.adj_file,
                &graph.adj_method,
                &sim_file,
                &sim_method,
                &config.cluster.to_hierarchy_config(),
            )
            .map_err(|e| fail(e.to_string()))?;
            let checksum = write_json(&dir.join(CLUSTERS_FILE), CLUSTERS_SCHEMA, &outcome)?;
            Ok((BTreeMap::from([(CLUSTERS_FILE.to_string(), checksum)]), Vec::new()))
        }
        Phase::Docgen => {
            let graph: GraphArtifact = read_json(&dir.join(GRAPH_FILE), GRAPH_SCHEMA)?;
            let summaries: SummariesArtifact =
                read_json(&dir.join(SUMMARIES_FILE), SUMMARIES_SCHEMA)?;
            let clusters: ClusterOutcome = read_json(&dir.join(CLUSTERS_FILE), CLUSTERS_SCHEMA)?;
            let gateway = config
                .build_gateway(config.provider.cache.then(|| dir.join(CACHE_DIR)).as_deref())?;
            let repo_name = repo_name_of(&graph.model);
            let outcome = crate::feature_doc::generate_documentation(
                &graph.model,
                &clusters.hierarchy,
                &summaries.methods,
                &gateway,
                &config.docgen_options(),
                &repo_name,
                config_hash,
            )
            .map_err(|e| fail(e.to_string()))?;
            let features = FeaturesArtifact {
                features: outcome.features,
                epics: outcome.epics,
                tree: outcome.tree.clone(),
                warnings: outcome.warnings.clone(),
            };
            let mut outputs = BTreeMap::new();
            outputs.insert(
                FEATURES_FILE.to_string(),
                write_json(&dir.join(FEATURES_FILE), FEATURES_SCHEMA, &features)?,
            );
            outputs.insert(
                TRACE_LINKS_FILE.to_string(),
                write_json(&dir.join(TRACE_LINKS_FILE), TRACE_LINKS_SCHEMA, &outcome.trace_links)?,
            );
            render_documentation(&outcome.tree, &dir.join(DOCS_DIR))
                .map_err(|e| fail(e.to_string()))?;
            Ok((outputs, outcome.warnings))
        }
    }
}

/// Last path component of the stored repo root, for document titles.
fn repo_name_of(model: &RepoModel) -> String {
    Path::new(&model.repo_root)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| model.repo_root.clone())
}

// ── validate_artifacts ──────────────────────────────────────────────

/// What `validate_artifacts` examined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked: Vec<String>,
    pub violations: Vec<String>,
}

/// Checks every artifact present in `dir` against its schema and
/// structural invariants. Returns the clean report, or
/// [`PipelineError::SchemaViolation`] listing each offending path.
pub fn validate_artifacts(dir: &Path) -> Result<ValidationReport, PipelineError> {
    if !dir.is_dir() {
        return Err(PipelineError::Io {
            path: dir.display().to_string(),
            message: "not a directory".into(),
        });
    }
    let mut checked = Vec::new();
    let mut violations = Vec::new();
    let fault = |path: &Path, message: String| format!("{}: {}", path.display(), message);

    let graph_path = dir.join(GRAPH_FILE);
    let graph: Option<GraphArtifact> = if graph_path.exists() {
        checked.push(GRAPH_FILE.to_string());
        match read_json::<GraphArtifact>(&graph_path, GRAPH_SCHEMA) {
            Ok(g) => {
                if let Err(e) = g.model.validate() {
                    violations.push(fault(&graph_path, e.to_string()));
                }
                if g.sources.len() != g.model.files.len() {
                    violations.push(fault(
                        &graph_path,
                        format!("{} sources for {} files", g.sources.len(), g.model.files.len()),
                    ));
                }
                for (matrix, level, n) in [
                    (&g.adj_file, AdjacencyLevel::File, g.model.files.len()),
                    (&g.adj_method, AdjacencyLevel::Method, g.model.methods.len()),
                ] {
                    if matrix.level != level || matrix.n != n {
                        violations.push(fault(
                            &graph_path,
                            format!("adjacency matrix should be {level:?} over {n} nodes"),
                        ));
                    } else if let Err(e) = matrix.validate() {
                        violations.push(fault(&graph_path, e.to_string()));
                    }
                }
                Some(g)
            }
            Err(e) => {
                violations.push(fault(&graph_path, e.to_string()));
                None
            }
        }
    } else {
        None
    };

    let summaries_path = dir.join(SUMMARIES_FILE);
    let summaries: Option<SummariesArtifact> = if summaries_path.exists() {
        checked.push(SUMMARIES_FILE.to_string());
        if graph.is_none() {
            violations.push(fault(&summaries_path, format!("present without {GRAPH_FILE}")));
        }
        match read_json::<SummariesArtifact>(&summaries_path, SUMMARIES_SCHEMA) {
            Ok(s) => {
                if let Some(g) = &graph {
                    if s.methods.len() != g.model.methods.len()
                        || s.files.len() != g.model.files.len()
                    {
                        violations.push(fault(
                            &summaries_path,
                            format!(
                                "{} method / {} file summaries for a model with {} / {}",
                                s.methods.len(),
                                s.files.len(),
                                g.model.methods.len(),
                                g.model.files.len()
                            ),
                        ));
                    }
                }
                for (i, m) in s.methods.iter().enumerate() {
                    if m.method_id != i {
                        violations
                            .push(fault(&summaries_path, format!("method summary {i} has id {}", m.method_id)));
                        break;
                    }
                }
                Some(s)
            }
            Err(e) => {
                violations.push(fault(&summaries_path, e.to_string()));
                None
            }
        }
    } else {
        None
    };

    for (file, level) in
        [(MATRIX_FILE_FILE, AdjacencyLevel::File), (MATRIX_METHOD_FILE, AdjacencyLevel::Method)]
    {
        let path = dir.join(file);
        if !path.exists() {
            if summaries.is_some() {
                violations.push(fault(&path, "missing though summaries.json exists".into()));
            }
            continue;
        }
        checked.push(file.to_string());
        match read_json::<SimilarityMatrix>(&path, MATRIX_SCHEMA) {
            Ok(m) => {
                if m.level != level {
                    violations.push(fault(&path, format!("level {:?}, expected {level:?}", m.level)));
                }
                if let Err(e) = m.validate() {
                    violations.push(fault(&path, e));
                }
                if let Some(g) = &graph {
                    let n = match level {
                        AdjacencyLevel::File => g.model.files.len(),
                        AdjacencyLevel::Method => g.model.methods.len(),
                    };
                    if m.n != n {
                        violations.push(fault(&path, format!("{} nodes, model has {n}", m.n)));
                    }
                }
            }
            Err(e) => violations.push(fault(&path, e.to_string())),
        }
    }

    let clusters_path = dir.join(CLUSTERS_FILE);
    let clusters: Option<ClusterOutcome> = if clusters_path.exists() {
        checked.push(CLUSTERS_FILE.to_string());
        match read_json::<ClusterOutcome>(&clusters_path, CLUSTERS_SCHEMA) {
            Ok(c) => {
                match &graph {
                    Some(g) => {
                        if let Err(e) = c.hierarchy.validate(&g.model) {
                            violations.push(fault(&clusters_path, e.to_string()));
                        }
                    }
                    None => violations
                        .push(fault(&clusters_path, format!("present without {GRAPH_FILE}"))),
                }
                Some(c)
            }
            Err(e) => {
                violations.push(fault(&clusters_path, e.to_string()));
                None
            }
        }
    } else {
        None
    };

    let features_path = dir.join(FEATURES_FILE);
    let links_path = dir.join(TRACE_LINKS_FILE);
    if features_path.exists() {
        checked.push(FEATURES_FILE.to_string());
        let features = match read_json::<FeaturesArtifact>(&features_path, FEATURES_SCHEMA) {
            Ok(f) => Some(f),
            Err(e) => {
                violations.push(fault(&features_path, e.to_string()));
                None
            }
        };
        let links: Option<Vec<TraceLink>> = if links_path.exists() {
            checked.push(TRACE_LINKS_FILE.to_string());
            match read_json::<Vec<TraceLink>>(&links_path, TRACE_LINKS_SCHEMA) {
                Ok(l) => Some(l),
                Err(e) => {
                    violations.push(fault(&links_path, e.to_string()));
                    None
                }
            }
        } else {
            violations.push(fault(&links_path, format!("missing though {FEATURES_FILE} exists")));
            None
        };
        if let Some(f) = &features {
            if clusters.is_none() {
                violations.push(fault(&features_path, format!("present without {CLUSTERS_FILE}")));
            }
            let mut cluster_ids = std::collections::BTreeSet::new();
            for feature in &f.features {
                if !cluster_ids.insert(feature.method_cluster_id) {
                    violations.push(fault(
                        &features_path,
                        format!("two features for method cluster {}", feature.method_cluster_id),
                    ));
                }
            }
            if let (Some(links), Some(g), Some(c)) = (&links, &graph, &clusters) {
                let by_feature: BTreeMap<usize, &TraceLink> =
                    links.iter().map(|l| (l.feature_id, l)).collect();
                for feature in &f.features {
                    match by_feature.get(&feature.feature_id) {
                        None => violations.push(fault(
                            &links_path,
                            format!("no link for feature {}", feature.feature_id),
                        )),
                        Some(link) => {
                            let lifted: std::collections::BTreeSet<usize> = link
                                .method_ids
                                .iter()
                                .map(|&m| g.model.methods[m].file_id)
                                .collect();
                            if lifted != link.file_ids {
                                violations.push(fault(
                                    &links_path,
                                    format!(
                                        "feature {} file links are not the owning files of its methods",
                                        feature.feature_id
                                    ),
                                ));
                            }
                            for &m in &link.method_ids {
                                if c.hierarchy.method_cluster_of.get(m)
                                    != Some(&feature.method_cluster_id)
                                {
                                    violations.push(fault(
                                        &links_path,
                                        format!(
                                            "feature {} links method {m} outside its cluster",
                                            feature.feature_id
                                        ),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            // Every feature appears in exactly one epic of the tree.
            let mut seen = BTreeMap::new();
            for section in &f.tree.epics {
                for feature_section in &section.features {
                    *seen.entry(feature_section.feature.feature_id).or_insert(0usize) += 1;
                }
            }
            for feature in &f.features {
                if seen.get(&feature.feature_id) != Some(&1) {
                    violations.push(fault(
                        &features_path,
                        format!(
                            "feature {} appears {} times in the document tree",
                            feature.feature_id,
                            seen.get(&feature.feature_id).unwrap_or(&0)
                        ),
                    ));
                }
            }
            let docs_index = dir.join(DOCS_DIR).join("index.md");
            if !docs_index.exists() {
                violations.push(fault(&docs_index, "rendered docs missing".into()));
            }
        }
    } else if links_path.exists() {
        checked.push(TRACE_LINKS_FILE.to_string());
        violations.push(fault(&links_path, format!("present without {FEATURES_FILE}")));
    }

    // Manifest-recorded outputs must still exist, unmodified.
    match load_manifest(dir) {
        Ok(Some(manifest)) => {
            checked.push(MANIFEST_FILE.to_string());
            for (phase, record) in &manifest.phases {
                if record.status != PhaseStatus::Completed {
                    continue;
                }
                for (artifact, checksum) in &record.outputs {
                    let path = dir.join(artifact);
                    match artifact::sha256_file(&path) {
                        Ok(found) if &found == checksum => {}
                        Ok(found) => violations.push(fault(
                            &path,
                            format!(
                                "modified since {phase} ran (recorded {checksum}, found {found})"
                            ),
                        )),
                        Err(_) => violations
                            .push(fault(&path, format!("recorded by {phase} but missing"))),
                    }
                }
            }
        }
        Ok(None) => {}
        Err(e) => violations.push(format!("{}: {}", dir.join(MANIFEST_FILE).display(), e)),
    }

    if violations.is_empty() {
        Ok(ValidationReport { checked, violations })
    } else {
        Err(PipelineError::SchemaViolation { violations })
    }
}

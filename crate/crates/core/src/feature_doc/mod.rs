//! Feature and epic generation plus traceability links and the
//! renderable documentation tree.
//!
//! One feature is generated per method cluster (chain-of-thought
//! prompt over the members' summaries), one epic per non-empty file
//! cluster. Oversized feature prompts degrade in recorded tiers (full
//! summaries → descriptions only → truncation), and gateway failures
//! produce flagged placeholder features rather than holes, so the
//! feature ↔ method-cluster bijection always survives.

pub mod render;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Hierarchy;
use crate::exec;
use crate::gateway::{Gateway, GatewayError, ModelRequest, Role};
use crate::repo_graph::RepoModel;
use crate::summarize::{estimate_tokens, MethodSummary};

pub use render::render_documentation;

// ── types ───────────────────────────────────────────────────────────

/// Which prompt tier a feature was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTier {
    /// Member descriptions and workflows.
    Full,
    /// Member descriptions only.
    DescriptionsOnly,
    /// Member list cut off at the budget, with a marker.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub feature_id: usize,
    pub title: String,
    pub description: String,
    pub method_cluster_id: usize,
    /// Unit embedding of title + description.
    pub embedding: Vec<f64>,
    pub prompt_tier: PromptTier,
    pub degraded: bool,
}

impl Feature {
    /// The text judged and embedded downstream.
    pub fn judged_text(&self) -> String {
        feature_embedding_text(&self.title, &self.description)
    }
}

/// Canonical text a feature is embedded over.
pub fn feature_embedding_text(title: &str, description: &str) -> String {
    format!("{title}. {description}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epic {
    pub epic_id: usize,
    pub title: String,
    pub description: String,
    pub file_cluster_id: usize,
    /// Never empty: feature-less file clusters get no epic.
    pub feature_ids: Vec<usize>,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLink {
    pub feature_id: usize,
    /// The feature's method-cluster membership; never empty.
    pub method_ids: BTreeSet<usize>,
    /// Exactly the owning files of `method_ids`.
    pub file_ids: BTreeSet<usize>,
}

/// One feature with its resolved link targets, ready to render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSection {
    pub feature: Feature,
    /// Repo-relative paths of the linked files, ascending.
    pub files: Vec<String>,
    /// Linked methods as (FQN, line span), in method-ID order.
    pub methods: Vec<(String, (usize, usize))>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpicSection {
    pub epic: Epic,
    pub features: Vec<FeatureSection>,
}

/// The full document: front matter plus ordered epics → features →
/// links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentTree {
    pub repo_name: String,
    pub config_hash: String,
    pub epics: Vec<EpicSection>,
}

#[derive(Debug, Error)]
pub enum DocError {
    #[error("no feature generated for method cluster {0}")]
    MissingFeature(usize),
    #[error("document tree inconsistency: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct DocgenOptions {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: usize,
    /// Prompt budget in estimated tokens; drives tier degradation.
    pub window_budget: usize,
    /// Extra attempts after a malformed reply before degrading.
    pub max_output_retries: u32,
}

impl Default for DocgenOptions {
    fn default() -> Self {
        DocgenOptions {
            model_name: "stub".into(),
            temperature: 0.2,
            max_tokens: 512,
            window_budget: 4000,
            max_output_retries: 2,
        }
    }
}

/// Everything the docgen phase produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocgenOutcome {
    pub features: Vec<Feature>,
    pub epics: Vec<Epic>,
    pub trace_links: Vec<TraceLink>,
    pub tree: DocumentTree,
    pub warnings: Vec<String>,
}

// ── prompt construction and parsing ─────────────────────────────────

const FEATURE_INSTRUCTIONS: &str = "INSTRUCTIONS: First list the entities these methods share, \
     then list the operations they perform, then reply with a TITLE: line and a DESCRIPTION: line.";

fn feature_prompt(
    cluster_id: usize,
    members: &[(&str, &MethodSummary)],
    tier: PromptTier,
    budget: usize,
    attempt: u32,
) -> String {
    let mut p = format!("ROLE: feature\nCLUSTER: {cluster_id}\n");
    match tier {
        PromptTier::Full => {
            for (fqn, summary) in members {
                p.push_str(&format!("MEMBER: {fqn}\nMEMBER-DESC: {}\n", summary.description));
                for step in &summary.workflow {
                    p.push_str(&format!("MEMBER-STEP: {step}\n"));
                }
            }
        }
        PromptTier::DescriptionsOnly => {
            for (fqn, summary) in members {
                p.push_str(&format!("MEMBER: {fqn}\nMEMBER-DESC: {}\n", summary.description));
            }
        }
        PromptTier::Truncated => {
            // Keep whole member lines while they fit; always keep at
            // least one so the prompt names the cluster's content.
            let mut kept = 0usize;
            for (fqn, summary) in members {
                let line = format!("MEMBER: {fqn}\nMEMBER-DESC: {}\n", summary.description);
                if kept > 0 && estimate_tokens(&p) + estimate_tokens(&line) > budget {
                    break;
                }
                p.push_str(&line);
                kept += 1;
            }
            p.push_str(&format!("TRUNCATED: {} of {} members shown\n", kept, members.len()));
        }
    }
    p.push_str(FEATURE_INSTRUCTIONS);
    if attempt > 0 {
        p.push_str(&format!("\nATTEMPT: {attempt}"));
    }
    p
}

fn epic_prompt(file_cluster_id: usize, features: &[&Feature], attempt: u32) -> String {
    let mut p = format!("ROLE: epic\nCLUSTER: {file_cluster_id}\n");
    for f in features {
        p.push_str(&format!("FEATURE-TITLE: {}\nFEATURE-DESC: {}\n", f.title, f.description));
    }
    p.push_str(
        "INSTRUCTIONS: Aggregate these features into one epic; reply with a TITLE: line \
         and a DESCRIPTION: line.",
    );
    if attempt > 0 {
        p.push_str(&format!("\nATTEMPT: {attempt}"));
    }
    p
}

/// Parses `TITLE:` / `DESCRIPTION:` lines; both must be non-empty.
fn parse_title_description(reply: &str) -> Option<(String, String)> {
    let mut title = String::new();
    let mut description = String::new();
    let mut in_description = false;
    for line in reply.lines() {
        if let Some(rest) = line.strip_prefix("TITLE:") {
            title = rest.trim().to_string();
            in_description = false;
        } else if let Some(rest) = line.strip_prefix("DESCRIPTION:") {
            description = rest.trim().to_string();
            in_description = true;
        } else if in_description && !line.trim().is_empty() {
            description.push(' ');
            description.push_str(line.trim());
        }
    }
    (!title.is_empty() && !description.is_empty()).then_some((title, description))
}

// ── generation ──────────────────────────────────────────────────────

fn complete_generation(
    gateway: &Gateway,
    opts: &DocgenOptions,
    role: Role,
    build_prompt: impl Fn(u32) -> String,
) -> Result<Option<(String, String)>, GatewayError> {
    for attempt in 0..=opts.max_output_retries {
        let req = ModelRequest::new(
            role,
            build_prompt(attempt),
            opts.temperature,
            opts.max_tokens,
            opts.model_name.clone(),
        );
        match gateway.complete(&req) {
            Ok(reply) => {
                if let Some(parsed) = parse_title_description(&reply) {
                    return Ok(Some(parsed));
                }
            }
            Err(GatewayError::Auth(m)) => return Err(GatewayError::Auth(m)),
            Err(_) => return Ok(None),
        }
    }
    Ok(None)
}

/// Generates the feature for one method cluster from its members'
/// summaries. `members` pairs each method's FQN with its summary, in
/// method-ID order. Only authentication failures are errors; malformed
/// or failing replies produce a flagged placeholder.
pub fn generate_feature(
    cluster_id: usize,
    members: &[(&str, &MethodSummary)],
    gateway: &Gateway,
    opts: &DocgenOptions,
) -> Result<Feature, GatewayError> {
    assert!(!members.is_empty(), "method cluster {cluster_id} has no members");
    let tier = [PromptTier::Full, PromptTier::DescriptionsOnly]
        .into_iter()
        .find(|&t| {
            estimate_tokens(&feature_prompt(cluster_id, members, t, opts.window_budget, 0))
                <= opts.window_budget
        })
        .unwrap_or(PromptTier::Truncated);
    let reply = complete_generation(gateway, opts, Role::Feature, |attempt| {
        feature_prompt(cluster_id, members, tier, opts.window_budget, attempt)
    })?;
    let (title, description, degraded) = match reply {
        Some((t, d)) => (t, d, false),
        None => (
            format!("Feature {cluster_id}"),
            format!(
                "Degraded feature for method cluster {cluster_id}; members: {}.",
                members.iter().map(|(fqn, _)| *fqn).collect::<Vec<_>>().join(", ")
            ),
            true,
        ),
    };
    let embedding = gateway.embed(&feature_embedding_text(&title, &description))?;
    Ok(Feature {
        feature_id: cluster_id,
        title,
        description,
        method_cluster_id: cluster_id,
        embedding,
        prompt_tier: tier,
        degraded,
    })
}

/// Aggregates the features of one file cluster into an epic.
pub fn generate_epic(
    file_cluster_id: usize,
    features: &[&Feature],
    gateway: &Gateway,
    opts: &DocgenOptions,
) -> Result<Epic, GatewayError> {
    assert!(!features.is_empty(), "file cluster {file_cluster_id} has no features");
    let reply = complete_generation(gateway, opts, Role::Epic, |attempt| {
        epic_prompt(file_cluster_id, features, attempt)
    })?;
    let (title, description, degraded) = match reply {
        Some((t, d)) => (t, d, false),
        None => (
            format!("Epic {file_cluster_id}"),
            format!(
                "Degraded epic for file cluster {file_cluster_id}; features: {}.",
                features.iter().map(|f| f.title.as_str()).collect::<Vec<_>>().join("; ")
            ),
            true,
        ),
    };
    Ok(Epic {
        epic_id: file_cluster_id,
        title,
        description,
        file_cluster_id,
        feature_ids: features.iter().map(|f| f.feature_id).collect(),
        degraded,
    })
}

// ── links and tree ──────────────────────────────────────────────────

/// Builds one trace link per feature: the feature's method-cluster
/// membership plus the owning-file lift.
pub fn derive_trace_links(
    model: &RepoModel,
    hierarchy: &Hierarchy,
    features: &[Feature],
) -> Result<Vec<TraceLink>, DocError> {
    let mut by_cluster: BTreeMap<usize, &Feature> = BTreeMap::new();
    for f in features {
        if by_cluster.insert(f.method_cluster_id, f).is_some() {
            return Err(DocError::Inconsistent(format!(
                "method cluster {} has more than one feature",
                f.method_cluster_id
            )));
        }
    }
    let mut links = Vec::with_capacity(hierarchy.n_method_clusters);
    for cluster in 0..hierarchy.n_method_clusters {
        let feature = by_cluster.get(&cluster).ok_or(DocError::MissingFeature(cluster))?;
        let method_ids: BTreeSet<usize> = hierarchy
            .method_cluster_of
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == cluster)
            .map(|(m, _)| m)
            .collect();
        if method_ids.is_empty() {
            return Err(DocError::Inconsistent(format!("method cluster {cluster} is empty")));
        }
        let file_ids: BTreeSet<usize> =
            method_ids.iter().map(|&m| model.methods[m].file_id).collect();
        links.push(TraceLink { feature_id: feature.feature_id, method_ids, file_ids });
    }
    Ok(links)
}

/// Assembles and validates the document tree: every feature under
/// exactly one epic, and every file link justified by a method link.
pub fn build_document_tree(
    model: &RepoModel,
    repo_name: &str,
    config_hash: &str,
    epics: &[Epic],
    features: &[Feature],
    links: &[TraceLink],
) -> Result<DocumentTree, DocError> {
    let feature_by_id: BTreeMap<usize, &Feature> =
        features.iter().map(|f| (f.feature_id, f)).collect();
    let link_by_feature: BTreeMap<usize, &TraceLink> =
        links.iter().map(|l| (l.feature_id, l)).collect();

    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut epic_sections = Vec::with_capacity(epics.len());
    for epic in epics {
        if epic.feature_ids.is_empty() {
            return Err(DocError::Inconsistent(format!("epic {} has no features", epic.epic_id)));
        }
        let mut sections = Vec::with_capacity(epic.feature_ids.len());
        for &fid in &epic.feature_ids {
            if !seen.insert(fid) {
                return Err(DocError::Inconsistent(format!(
                    "feature {fid} appears under more than one epic"
                )));
            }
            let feature = *feature_by_id
                .get(&fid)
                .ok_or_else(|| DocError::Inconsistent(format!("unknown feature {fid}")))?;
            let link = *link_by_feature
                .get(&fid)
                .ok_or_else(|| DocError::Inconsistent(format!("feature {fid} has no link")))?;
            let lifted: BTreeSet<usize> =
                link.method_ids.iter().map(|&m| model.methods[m].file_id).collect();
            if lifted != link.file_ids {
                return Err(DocError::Inconsistent(format!(
                    "feature {fid} file links are not the owning-file lift"
                )));
            }
            sections.push(FeatureSection {
                feature: feature.clone(),
                files: link.file_ids.iter().map(|&f| model.files[f].path.clone()).collect(),
                methods: link
                    .method_ids
                    .iter()
                    .map(|&m| (model.methods[m].fqn.clone(), model.methods[m].span))
                    .collect(),
            });
        }
        epic_sections.push(EpicSection { epic: epic.clone(), features: sections });
    }
    if seen.len() != features.len() {
        let orphan = features.iter().find(|f| !seen.contains(&f.feature_id)).unwrap();
        return Err(DocError::Inconsistent(format!(
            "feature {} belongs to no epic",
            orphan.feature_id
        )));
    }
    Ok(DocumentTree {
        repo_name: repo_name.to_string(),
        config_hash: config_hash.to_string(),
        epics: epic_sections,
    })
}

/// Runs the whole docgen phase: features per method cluster, epics per
/// non-empty file cluster, links, and the validated tree.
pub fn generate_documentation(
    model: &RepoModel,
    hierarchy: &Hierarchy,
    summaries: &[MethodSummary],
    gateway: &Gateway,
    opts: &DocgenOptions,
    repo_name: &str,
    config_hash: &str,
) -> Result<DocgenOutcome, DocError> {
    hierarchy.validate(model).map_err(|e| DocError::Inconsistent(e.to_string()))?;
    if summaries.len() != model.methods.len() {
        return Err(DocError::Inconsistent(format!(
            "{} summaries for {} methods",
            summaries.len(),
            model.methods.len()
        )));
    }

    let members_of: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); hierarchy.n_method_clusters];
        for (m, &c) in hierarchy.method_cluster_of.iter().enumerate() {
            v[c].push(m);
        }
        v
    };
    let features = exec::try_map_vec((0..hierarchy.n_method_clusters).collect(), |c| {
        let members: Vec<(&str, &MethodSummary)> = members_of[c]
            .iter()
            .map(|&m| (model.methods[m].fqn.as_str(), &summaries[m]))
            .collect();
        generate_feature(c, &members, gateway, opts)
    })
    .map_err(DocError::Gateway)?;

    // Map each method cluster to its file cluster, then build one epic
    // per file cluster that actually has features.
    let mut file_cluster_of: BTreeMap<usize, usize> = BTreeMap::new();
    for group in &hierarchy.method_partitions {
        for &global in &group.global_cluster_ids {
            file_cluster_of.insert(global, group.file_cluster);
        }
    }
    let mut features_per_fc: BTreeMap<usize, Vec<&Feature>> = BTreeMap::new();
    for f in &features {
        let fc = *file_cluster_of.get(&f.method_cluster_id).ok_or_else(|| {
            DocError::Inconsistent(format!(
                "method cluster {} has no file cluster",
                f.method_cluster_id
            ))
        })?;
        features_per_fc.entry(fc).or_default().push(f);
    }
    let epics = exec::try_map_vec(features_per_fc.into_iter().collect::<Vec<_>>(), |(fc, fs)| {
        generate_epic(fc, &fs, gateway, opts)
    })
    .map_err(DocError::Gateway)?;

    let trace_links = derive_trace_links(model, hierarchy, &features)?;
    let tree =
        build_document_tree(model, repo_name, config_hash, &epics, &features, &trace_links)?;

    let mut warnings = Vec::new();
    for f in &features {
        if f.prompt_tier == PromptTier::Truncated {
            warnings.push(format!("feature {} prompt truncated to fit the budget", f.feature_id));
        }
        if f.degraded {
            warnings.push(format!("degraded feature {}", f.feature_id));
        }
    }
    for e in &epics {
        if e.degraded {
            warnings.push(format!("degraded epic {}", e.epic_id));
        }
    }
    Ok(DocgenOutcome { features, epics, trace_links, tree, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{hierarchical_cluster, HierarchyConfig};
    use crate::repo_graph::{build_adjacency, AdjacencyLevel, FileNode, MethodNode};
    use crate::summarize::{summarize_repository, SummarizeOptions};

    fn toy_model() -> (RepoModel, Vec<String>) {
        let model = RepoModel {
            repo_root: "mem://toy".into(),
            files: vec![
                FileNode { file_id: 0, path: "p/A.java".into(), package: "p".into() },
                FileNode { file_id: 1, path: "p/B.java".into(), package: "p".into() },
            ],
            methods: vec![
                MethodNode {
                    method_id: 0,
                    fqn: "p.A.run".into(),
                    file_id: 0,
                    span: (1, 2),
                    source_text: "void run() { helper(); }".into(),
                },
                MethodNode {
                    method_id: 1,
                    fqn: "p.A.helper".into(),
                    file_id: 0,
                    span: (3, 4),
                    source_text: "void helper() {}".into(),
                },
                MethodNode {
                    method_id: 2,
                    fqn: "p.B.other".into(),
                    file_id: 1,
                    span: (1, 2),
                    source_text: "void other() {}".into(),
                },
            ],
            imports: std::collections::BTreeSet::new(),
            calls: [(0, 1)].into_iter().collect(),
        };
        let sources = vec![
            "class A { void run() { helper(); } void helper() {} }".to_string(),
            "class B { void other() {} }".to_string(),
        ];
        (model, sources)
    }

    fn toy_docgen() -> (RepoModel, DocgenOutcome) {
        let (model, sources) = toy_model();
        let gateway = Gateway::stub();
        let adj_m = build_adjacency(&model, AdjacencyLevel::Method);
        let adj_f = build_adjacency(&model, AdjacencyLevel::File);
        let summarized = summarize_repository(
            &model,
            &sources,
            &adj_m,
            &gateway,
            &SummarizeOptions::default(),
        )
        .unwrap();
        let outcome = hierarchical_cluster(
            &model,
            &adj_f,
            &adj_m,
            &summarized.sim_file,
            &summarized.sim_method,
            &HierarchyConfig::default(),
        )
        .unwrap();
        let docs = generate_documentation(
            &model,
            &outcome.hierarchy,
            &summarized.methods,
            &gateway,
            &DocgenOptions::default(),
            "toy",
            "cfg-hash",
        )
        .unwrap();
        (model, docs)
    }

    #[test]
    fn features_biject_with_method_clusters() {
        let (model, docs) = toy_docgen();
        let clusters: BTreeSet<usize> =
            docs.features.iter().map(|f| f.method_cluster_id).collect();
        assert_eq!(clusters.len(), docs.features.len());
        let mut seen_methods = BTreeSet::new();
        for link in &docs.trace_links {
            assert!(!link.method_ids.is_empty());
            for &m in &link.method_ids {
                assert!(seen_methods.insert(m), "method {m} linked twice");
            }
            let lift: BTreeSet<usize> =
                link.method_ids.iter().map(|&m| model.methods[m].file_id).collect();
            assert_eq!(lift, link.file_ids);
        }
        assert_eq!(seen_methods.len(), model.methods.len());
    }

    #[test]
    fn stub_features_follow_the_template() {
        let (_, docs) = toy_docgen();
        for f in &docs.features {
            assert_eq!(f.title, format!("STUB-FEATURE({})", f.method_cluster_id));
            assert!(f.description.contains("covering"));
            assert!(!f.degraded);
            assert_eq!(f.prompt_tier, PromptTier::Full);
            let norm: f64 = f.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        for e in &docs.epics {
            assert_eq!(e.title, format!("STUB-EPIC({})", e.file_cluster_id));
            assert!(!e.feature_ids.is_empty());
        }
    }

    #[test]
    fn oversized_member_lists_fall_back_in_recorded_tiers() {
        let summary = MethodSummary {
            method_id: 0,
            description: "long ".repeat(50),
            workflow: vec!["step one".into(); 20],
            quality: String::new(),
            embedding: vec![1.0],
            degraded: false,
        };
        let summaries: Vec<MethodSummary> = (0..200)
            .map(|m| MethodSummary { method_id: m, ..summary.clone() })
            .collect();
        let members: Vec<(&str, &MethodSummary)> =
            summaries.iter().map(|s| ("p.C.m", s)).collect();
        let gateway = Gateway::stub();
        // Budget below even the descriptions-only prompt forces the
        // truncation tier.
        let opts = DocgenOptions { window_budget: 120, ..Default::default() };
        let feature = generate_feature(7, &members, &gateway, &opts).unwrap();
        assert_eq!(feature.prompt_tier, PromptTier::Truncated);
        assert!(!feature.degraded);
        // A generous budget keeps the full tier.
        let opts = DocgenOptions { window_budget: 1_000_000, ..Default::default() };
        let feature = generate_feature(7, &members, &gateway, &opts).unwrap();
        assert_eq!(feature.prompt_tier, PromptTier::Full);
    }

    #[test]
    fn singleton_cluster_generates_a_feature() {
        let summary = MethodSummary {
            method_id: 0,
            description: "parses the configuration file".into(),
            workflow: vec![],
            quality: String::new(),
            embedding: vec![1.0],
            degraded: false,
        };
        let gateway = Gateway::stub();
        let feature =
            generate_feature(3, &[("p.C.parse", &summary)], &gateway, &DocgenOptions::default())
                .unwrap();
        assert_eq!(feature.title, "STUB-FEATURE(3)");
        assert!(feature.description.contains("p.C.parse"));
    }

    #[test]
    fn missing_feature_for_a_cluster_is_an_error() {
        let (model, docs) = toy_docgen();
        let n_clusters = docs.features.len();
        let hierarchy = {
            let (model, sources) = toy_model();
            let gateway = Gateway::stub();
            let adj_m = build_adjacency(&model, AdjacencyLevel::Method);
            let adj_f = build_adjacency(&model, AdjacencyLevel::File);
            let s = summarize_repository(
                &model,
                &sources,
                &adj_m,
                &gateway,
                &SummarizeOptions::default(),
            )
            .unwrap();
            hierarchical_cluster(
                &model,
                &adj_f,
                &adj_m,
                &s.sim_file,
                &s.sim_method,
                &HierarchyConfig::default(),
            )
            .unwrap()
            .hierarchy
        };
        let missing: Vec<Feature> = docs.features.iter().skip(1).cloned().collect();
        if n_clusters > 1 {
            match derive_trace_links(&model, &hierarchy, &missing) {
                Err(DocError::MissingFeature(_)) => {}
                other => panic!("expected MissingFeature, got {other:?}"),
            }
        }
    }

    #[test]
    fn degraded_features_keep_the_bijection() {
        struct Failing;
        impl crate::gateway::Provider for Failing {
            fn model_name(&self) -> &str {
                "failing"
            }
            fn embed_dim(&self) -> usize {
                8
            }
            fn complete(
                &self,
                _req: &ModelRequest,
            ) -> Result<String, crate::gateway::ProviderError> {
                Err(crate::gateway::ProviderError::Transport("down".into()))
            }
            fn embed(&self, text: &str) -> Result<Vec<f64>, crate::gateway::ProviderError> {
                crate::gateway::stub::StubProvider::with_dim(8).embed(text)
            }
        }
        let gateway = Gateway::new(
            Box::new(Failing),
            None,
            None,
            crate::gateway::RetryPolicy {
                max_retries: 0,
                backoff_base: std::time::Duration::from_millis(1),
            },
        );
        let summary = MethodSummary {
            method_id: 0,
            description: "does things".into(),
            workflow: vec![],
            quality: String::new(),
            embedding: vec![1.0],
            degraded: false,
        };
        let feature =
            generate_feature(0, &[("p.C.m", &summary)], &gateway, &DocgenOptions::default())
                .unwrap();
        assert!(feature.degraded);
        assert_eq!(feature.title, "Feature 0");
        assert!(feature.description.contains("p.C.m"));
    }

    #[test]
    fn unknown_or_orphaned_features_fail_tree_validation() {
        let (model, docs) = toy_docgen();
        let mut epics = docs.epics.clone();
        epics[0].feature_ids.push(9999);
        match build_document_tree(&model, "toy", "h", &epics, &docs.features, &docs.trace_links) {
            Err(DocError::Inconsistent(m)) => assert!(m.contains("9999")),
            other => panic!("expected Inconsistent, got {other:?}"),
        }
    }
}

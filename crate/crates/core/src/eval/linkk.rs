//! Link@k: how well feature trace links predict the methods changed
//! by real commits.
//!
//! Each commit's message is embedded and ranked against the feature
//! embeddings; the top-k features' method links form the prediction.
//! Precision and recall are computed per commit against the commit's
//! changed methods and macro-averaged; F1 comes from the averaged
//! rates. Commits whose changed methods cannot be resolved against
//! the model are skipped with a warning, never silently dropped.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::feature_doc::{Feature, TraceLink};
use crate::repo_graph::RepoModel;

use super::metrics::f1_of;
use super::EvalError;

/// One commit from `commits.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub message: String,
    pub changed_fqns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CommitsFile {
    commits: Vec<CommitRecord>,
}

/// Parses a `commits.json` fixture.
pub fn load_commits(path: &std::path::Path) -> Result<Vec<CommitRecord>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })?;
    commits_from_json(&text)
}

pub fn commits_from_json(text: &str) -> Result<Vec<CommitRecord>, EvalError> {
    let parsed: CommitsFile =
        serde_json::from_str(text).map_err(|e| EvalError::InvalidCommits(e.to_string()))?;
    if parsed.commits.is_empty() {
        return Err(EvalError::InvalidCommits("no commits".into()));
    }
    let mut seen = BTreeSet::new();
    for c in &parsed.commits {
        if c.id.is_empty() || !seen.insert(c.id.clone()) {
            return Err(EvalError::InvalidCommits(format!("missing or duplicate id {:?}", c.id)));
        }
        if c.changed_fqns.is_empty() {
            return Err(EvalError::InvalidCommits(format!("commit {} changes nothing", c.id)));
        }
    }
    Ok(parsed.commits)
}

/// A commit with its changed methods resolved to model IDs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCommit {
    pub id: String,
    pub message: String,
    pub changed_methods: BTreeSet<usize>,
}

/// Resolves changed FQNs against the model. Unresolvable FQNs are
/// warned about; a commit with no resolvable method at all is skipped
/// (with its own warning) rather than evaluated on an empty set.
pub fn resolve_commits(
    commits: &[CommitRecord],
    model: &RepoModel,
) -> (Vec<ResolvedCommit>, Vec<String>) {
    let by_fqn: BTreeMap<&str, usize> =
        model.methods.iter().map(|m| (m.fqn.as_str(), m.method_id)).collect();
    let mut resolved = Vec::new();
    let mut warnings = Vec::new();
    for commit in commits {
        let mut methods = BTreeSet::new();
        for fqn in &commit.changed_fqns {
            match by_fqn.get(fqn.as_str()) {
                Some(&id) => {
                    methods.insert(id);
                }
                None => warnings
                    .push(format!("commit {}: unresolvable changed fqn {}", commit.id, fqn)),
            }
        }
        if methods.is_empty() {
            warnings.push(format!(
                "commit {} skipped: none of its changed methods resolve against the model",
                commit.id
            ));
        } else {
            resolved.push(ResolvedCommit {
                id: commit.id.clone(),
                message: commit.message.clone(),
                changed_methods: methods,
            });
        }
    }
    (resolved, warnings)
}

/// Macro-averaged Link@k scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAtK {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub commits_evaluated: usize,
}

/// Computes Link@k. `message_embeddings[i]` embeds
/// `commits[i].message` in the feature-embedding space.
pub fn link_at_k(
    commits: &[ResolvedCommit],
    message_embeddings: &[Vec<f64>],
    features: &[Feature],
    trace_links: &[TraceLink],
    k: usize,
) -> Result<LinkAtK, EvalError> {
    if commits.is_empty() {
        return Err(EvalError::ZeroDenominator("no resolvable commits to evaluate".into()));
    }
    if message_embeddings.len() != commits.len() {
        return Err(EvalError::InputMismatch(format!(
            "{} embeddings for {} commits",
            message_embeddings.len(),
            commits.len()
        )));
    }
    if features.is_empty() {
        return Err(EvalError::ZeroDenominator("no features to rank".into()));
    }
    if k == 0 {
        return Err(EvalError::InputMismatch("k must be at least 1".into()));
    }
    let methods_of: BTreeMap<usize, &BTreeSet<usize>> =
        trace_links.iter().map(|l| (l.feature_id, &l.method_ids)).collect();
    for f in features {
        if !methods_of.contains_key(&f.feature_id) {
            return Err(EvalError::InputMismatch(format!(
                "feature {} has no trace link",
                f.feature_id
            )));
        }
    }

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for (commit, embedding) in commits.iter().zip(message_embeddings) {
        let ranked = super::judges::retrieve_candidates(embedding, features, k);
        let predicted: BTreeSet<usize> = ranked
            .iter()
            .flat_map(|&(fid, _)| methods_of[&fid].iter().copied())
            .collect();
        let hits = predicted.intersection(&commit.changed_methods).count() as f64;
        precision_sum +=
            if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
        recall_sum += hits / commit.changed_methods.len() as f64;
    }
    let n = commits.len() as f64;
    let precision = precision_sum / n;
    let recall = recall_sum / n;
    Ok(LinkAtK {
        k,
        precision,
        recall,
        f1: f1_of(precision, recall),
        commits_evaluated: commits.len(),
    })
}

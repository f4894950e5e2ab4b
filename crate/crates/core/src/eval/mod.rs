//! Evaluation: coverage metrics over a two-stage judged comparison
//! with a manual ground truth, traceability precision/recall, commit
//! Link@k, and judge-agreement statistics.

pub mod agreement;
pub mod judges;
pub mod keywords;
pub mod linkk;
pub mod metrics;
pub mod report;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repo_graph::RepoModel;

pub use agreement::{cohen_kappa, spearman_rho, KappaResult, SpearmanResult};
pub use judges::{
    judge_complete_coverage, judge_relevance, retrieve_candidates, run_judging,
    CoverageAssessment, CoverageJudgment, Judge, JudgeError, JudgeVote, JudgingOutcome, LlmJudge,
    RelevanceAssessment, RelevanceJudgment, StubJudge,
};
pub use linkk::{link_at_k, resolve_commits, CommitRecord, LinkAtK, ResolvedCommit};
pub use metrics::{coverage_metrics, trace_metrics, CoverageScores, TraceScores, TraceStrictness};
pub use report::EvalReport;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("invalid commits file: {0}")]
    InvalidCommits(String),
    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

// ── ground truth ────────────────────────────────────────────────────

/// One manually documented feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtFeature {
    pub gt_id: String,
    pub text: String,
}

/// Manual features with their file- and optional method-level links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub features: Vec<GtFeature>,
    /// Manual traceability links as (gt_id, repo-relative file path).
    pub trace_links: BTreeSet<(String, String)>,
    /// Optional method-level links as (gt_id, FQN).
    pub method_links: BTreeSet<(String, String)>,
}

#[derive(Deserialize)]
struct GroundTruthFile {
    features: Vec<GtFeatureRecord>,
}

#[derive(Deserialize)]
struct GtFeatureRecord {
    id: String,
    text: String,
    #[serde(default)]
    links: Vec<GtLinkRecord>,
}

/// A link names either a file path or a method FQN.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GtLinkRecord {
    #[serde(default)]
    file: Option<String>,
    #[serde(default)]
    fqn: Option<String>,
}

impl GroundTruth {
    /// Parses and validates a `ground_truth.json` document.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let parsed: GroundTruthFile = serde_json::from_str(text)
            .map_err(|e| EvalError::InvalidGroundTruth(e.to_string()))?;
        let mut features = Vec::with_capacity(parsed.features.len());
        let mut trace_links = BTreeSet::new();
        let mut method_links = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for record in parsed.features {
            if record.id.is_empty() {
                return Err(EvalError::InvalidGroundTruth("empty feature id".into()));
            }
            if !seen.insert(record.id.clone()) {
                return Err(EvalError::InvalidGroundTruth(format!(
                    "duplicate feature id {:?}",
                    record.id
                )));
            }
            if record.text.trim().is_empty() {
                return Err(EvalError::InvalidGroundTruth(format!(
                    "feature {:?} has empty text",
                    record.id
                )));
            }
            for link in record.links {
                match (link.file, link.fqn) {
                    (Some(file), None) if !file.is_empty() => {
                        trace_links.insert((record.id.clone(), file));
                    }
                    (None, Some(fqn)) if !fqn.is_empty() => {
                        method_links.insert((record.id.clone(), fqn));
                    }
                    _ => {
                        return Err(EvalError::InvalidGroundTruth(format!(
                            "feature {:?} has a link with neither a file nor an fqn",
                            record.id
                        )))
                    }
                }
            }
            features.push(GtFeature { gt_id: record.id, text: record.text });
        }
        if features.is_empty() {
            return Err(EvalError::InvalidGroundTruth("no features".into()));
        }
        Ok(GroundTruth { features, trace_links, method_links })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_links(&self) -> usize {
        self.trace_links.len() + self.method_links.len()
    }

    /// Flags links that do not resolve against the model; the caller
    /// reports these as warnings.
    pub fn unresolved_against(&self, model: &RepoModel) -> Vec<String> {
        let paths: BTreeSet<&str> = model.files.iter().map(|f| f.path.as_str()).collect();
        let fqns: BTreeSet<&str> = model.methods.iter().map(|m| m.fqn.as_str()).collect();
        let mut flagged = Vec::new();
        for (gt, file) in &self.trace_links {
            if !paths.contains(file.as_str()) {
                flagged.push(format!("ground truth {gt}: unresolved file link {file}"));
            }
        }
        for (gt, fqn) in &self.method_links {
            if !fqns.contains(fqn.as_str()) {
                flagged.push(format!("ground truth {gt}: unresolved method link {fqn}"));
            }
        }
        flagged
    }
}

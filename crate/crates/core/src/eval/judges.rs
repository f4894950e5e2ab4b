//! Two-stage judged comparison of generated features against a manual
//! ground truth.
//!
//! Stage I: per (ground truth, candidate) pair, two primary judges
//! independently extract entity/operation sets and vote "relevant"
//! exactly when both intersections are non-empty; disagreement goes to
//! a tiebreaker that sees both verdicts and rationales. Stage II: for
//! each ground-truth feature, the judges decide whether the union of
//! its relevant candidates' sets subsumes the ground truth's sets.
//! A failed judgment never counts silently: the item is marked
//! unavailable and excluded from metric denominators with a warning.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::cosine;
use crate::exec;
use crate::feature_doc::Feature;
use crate::gateway::{Gateway, ModelRequest, Role};

use super::keywords::{extract_entities, extract_operations, format_set};
use super::{EvalError, GroundTruth};

// ── assessments and judgments ───────────────────────────────────────

/// One judge's recorded vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVote {
    pub judge: String,
    pub verdict: bool,
    pub rationale: String,
}

/// A primary judge's Stage-I output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceAssessment {
    pub gt_entities: BTreeSet<String>,
    pub gt_operations: BTreeSet<String>,
    pub cand_entities: BTreeSet<String>,
    pub cand_operations: BTreeSet<String>,
    pub relevant: bool,
    pub rationale: String,
}

/// A primary judge's Stage-II output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageAssessment {
    pub covered: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
}

/// A relevance or coverage judge. Implementations must be safe to
/// call concurrently for distinct pairs.
pub trait Judge: Sync {
    fn name(&self) -> String;
    fn assess_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
    ) -> Result<RelevanceAssessment, JudgeError>;
    fn assess_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
    ) -> Result<CoverageAssessment, JudgeError>;
    fn tiebreak_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError>;
    fn tiebreak_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError>;
}

/// Resolved Stage-I judgment for one (ground truth, candidate) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub gt_id: String,
    pub candidate_feature_id: usize,
    /// Sets as extracted by the first successful primary judge.
    pub gt_entities: BTreeSet<String>,
    pub gt_operations: BTreeSet<String>,
    pub candidate_entities: BTreeSet<String>,
    pub candidate_operations: BTreeSet<String>,
    pub votes: Vec<JudgeVote>,
    #[serde(rename = "final")]
    pub final_relevant: bool,
    pub tiebreak_used: bool,
    /// False when a required judgment failed; the pair is then
    /// excluded from denominators (and `final` is meaningless).
    pub available: bool,
}

/// Resolved Stage-II judgment for one ground-truth feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageJudgment {
    pub gt_id: String,
    /// Stage-I-relevant candidates, in retrieval rank order.
    pub related_feature_ids: Vec<usize>,
    pub votes: Vec<JudgeVote>,
    pub final_cc: bool,
    pub tiebreak_used: bool,
    pub available: bool,
}

// ── offline judge ───────────────────────────────────────────────────

/// Deterministic keyword judge: entity/operation extraction via the
/// fixed lexicons, exact lowercase set matching.
pub struct StubJudge {
    pub label: String,
}

impl Default for StubJudge {
    fn default() -> Self {
        StubJudge { label: "stub-judge".into() }
    }
}

impl StubJudge {
    pub fn named(label: impl Into<String>) -> Self {
        StubJudge { label: label.into() }
    }
}

fn keyword_relevance(gt_text: &str, candidate_text: &str) -> RelevanceAssessment {
    let gt_entities = extract_entities(gt_text);
    let gt_operations = extract_operations(gt_text);
    let cand_entities = extract_entities(candidate_text);
    let cand_operations = extract_operations(candidate_text);
    let shared_e: Vec<String> = gt_entities.intersection(&cand_entities).cloned().collect();
    let shared_o: Vec<String> = gt_operations.intersection(&cand_operations).cloned().collect();
    let relevant = !shared_e.is_empty() && !shared_o.is_empty();
    RelevanceAssessment {
        rationale: format!(
            "shared entities [{}], shared operations [{}]",
            shared_e.join(", "),
            shared_o.join(", ")
        ),
        gt_entities,
        gt_operations,
        cand_entities,
        cand_operations,
        relevant,
    }
}

fn keyword_coverage(gt_text: &str, related_texts: &[String]) -> CoverageAssessment {
    let gt_entities = extract_entities(gt_text);
    let gt_operations = extract_operations(gt_text);
    let union = related_texts.join(" ");
    let union_entities = extract_entities(&union);
    let union_operations = extract_operations(&union);
    let covered =
        gt_entities.is_subset(&union_entities) && gt_operations.is_subset(&union_operations);
    CoverageAssessment {
        covered,
        rationale: format!(
            "ground truth needs [{}] / [{}]",
            format_set(&gt_entities),
            format_set(&gt_operations)
        ),
    }
}

impl Judge for StubJudge {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn assess_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
    ) -> Result<RelevanceAssessment, JudgeError> {
        Ok(keyword_relevance(gt_text, candidate_text))
    }

    fn assess_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
    ) -> Result<CoverageAssessment, JudgeError> {
        Ok(keyword_coverage(gt_text, related_texts))
    }

    fn tiebreak_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
        _votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        let a = keyword_relevance(gt_text, candidate_text);
        Ok((a.relevant, format!("tiebreak recomputation: {}", a.rationale)))
    }

    fn tiebreak_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
        _votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        let a = keyword_coverage(gt_text, related_texts);
        Ok((a.covered, format!("tiebreak recomputation: {}", a.rationale)))
    }
}

// ── gateway-backed judge ────────────────────────────────────────────

/// Judge that delegates extraction and matching to a model behind the
/// gateway, using the structured judge reply format.
pub struct LlmJudge<'a> {
    gateway: &'a Gateway,
    model_name: String,
    max_tokens: usize,
}

impl<'a> LlmJudge<'a> {
    pub fn new(gateway: &'a Gateway, model_name: impl Into<String>) -> Self {
        LlmJudge { gateway, model_name: model_name.into(), max_tokens: 512 }
    }

    fn complete(&self, role: Role, prompt: String) -> Result<String, JudgeError> {
        let req = ModelRequest::new(role, prompt, 0.0, self.max_tokens, self.model_name.clone());
        self.gateway.complete(&req).map_err(|e| JudgeError::Unavailable(e.to_string()))
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_reply_set(reply: &str, tag: &str) -> BTreeSet<String> {
    reply
        .lines()
        .find_map(|l| l.strip_prefix(tag).and_then(|r| r.strip_prefix(": ")))
        .map(|rest| {
            rest.split(',')
                .map(|s| s.trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default()
}

fn parse_reply_line<'r>(reply: &'r str, tag: &str) -> Option<&'r str> {
    reply.lines().find_map(|l| l.strip_prefix(tag).and_then(|r| r.strip_prefix(": ")))
}

fn parse_verdict(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

fn votes_context(votes: &[JudgeVote]) -> String {
    let mut out = String::new();
    for (i, v) in votes.iter().enumerate() {
        out.push_str(&format!(
            "VERDICT-{}: {}\nRATIONALE-{}: {}\n",
            i + 1,
            if v.verdict { "yes" } else { "no" },
            i + 1,
            one_line(&v.rationale)
        ));
    }
    out
}

const RELEVANCE_INSTRUCTIONS: &str = "INSTRUCTIONS: Extract the entity set and the operation set \
     of each text, then decide whether they describe the same functionality (both intersections \
     non-empty). Reply with GT-ENTITIES:, GT-OPERATIONS:, CAND-ENTITIES:, CAND-OPERATIONS:, \
     RELEVANT: yes|no, RATIONALE: lines.";

const COVERAGE_INSTRUCTIONS: &str = "INSTRUCTIONS: Decide whether the union of the related \
     features' entity and operation sets subsumes the ground truth's sets. Reply with \
     UNION-ENTITIES:, UNION-OPERATIONS:, COVERED: yes|no, RATIONALE: lines.";

impl Judge for LlmJudge<'_> {
    fn name(&self) -> String {
        format!("llm:{}", self.model_name)
    }

    fn assess_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
    ) -> Result<RelevanceAssessment, JudgeError> {
        let prompt = format!(
            "ROLE: judge\nTASK: relevance\nGT: {}\nCANDIDATE: {}\n{RELEVANCE_INSTRUCTIONS}",
            one_line(gt_text),
            one_line(candidate_text)
        );
        let reply = self.complete(Role::Judge, prompt)?;
        let relevant = parse_reply_line(&reply, "RELEVANT")
            .and_then(parse_verdict)
            .ok_or_else(|| JudgeError::Unavailable("missing RELEVANT verdict".into()))?;
        Ok(RelevanceAssessment {
            gt_entities: parse_reply_set(&reply, "GT-ENTITIES"),
            gt_operations: parse_reply_set(&reply, "GT-OPERATIONS"),
            cand_entities: parse_reply_set(&reply, "CAND-ENTITIES"),
            cand_operations: parse_reply_set(&reply, "CAND-OPERATIONS"),
            relevant,
            rationale: parse_reply_line(&reply, "RATIONALE").unwrap_or("").to_string(),
        })
    }

    fn assess_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
    ) -> Result<CoverageAssessment, JudgeError> {
        let mut prompt = format!("ROLE: judge\nTASK: coverage\nGT: {}\n", one_line(gt_text));
        for text in related_texts {
            prompt.push_str(&format!("RELATED: {}\n", one_line(text)));
        }
        prompt.push_str(COVERAGE_INSTRUCTIONS);
        let reply = self.complete(Role::Judge, prompt)?;
        let covered = parse_reply_line(&reply, "COVERED")
            .and_then(parse_verdict)
            .ok_or_else(|| JudgeError::Unavailable("missing COVERED verdict".into()))?;
        Ok(CoverageAssessment {
            covered,
            rationale: parse_reply_line(&reply, "RATIONALE").unwrap_or("").to_string(),
        })
    }

    fn tiebreak_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        let prompt = format!(
            "ROLE: tiebreak\nTASK: relevance\nGT: {}\nCANDIDATE: {}\n{}INSTRUCTIONS: The two \
             judges above disagree. Review their verdicts and rationales, then reply with \
             VERDICT: yes|no and RATIONALE: lines.",
            one_line(gt_text),
            one_line(candidate_text),
            votes_context(votes)
        );
        let reply = self.complete(Role::Tiebreak, prompt)?;
        let verdict = parse_reply_line(&reply, "VERDICT")
            .and_then(parse_verdict)
            .ok_or_else(|| JudgeError::Unavailable("missing tiebreak VERDICT".into()))?;
        Ok((verdict, parse_reply_line(&reply, "RATIONALE").unwrap_or("").to_string()))
    }

    fn tiebreak_coverage(
        &self,
        gt_text: &str,
        related_texts: &[String],
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        let mut prompt = format!("ROLE: tiebreak\nTASK: coverage\nGT: {}\n", one_line(gt_text));
        for text in related_texts {
            prompt.push_str(&format!("RELATED: {}\n", one_line(text)));
        }
        prompt.push_str(&votes_context(votes));
        prompt.push_str(
            "INSTRUCTIONS: The two judges above disagree. Review their verdicts and rationales, \
             then reply with VERDICT: yes|no and RATIONALE: lines.",
        );
        let reply = self.complete(Role::Tiebreak, prompt)?;
        let verdict = parse_reply_line(&reply, "VERDICT")
            .and_then(parse_verdict)
            .ok_or_else(|| JudgeError::Unavailable("missing tiebreak VERDICT".into()))?;
        Ok((verdict, parse_reply_line(&reply, "RATIONALE").unwrap_or("").to_string()))
    }
}

// ── pair and feature judging ────────────────────────────────────────

/// Judges one (ground truth, candidate) pair through both primaries
/// and, on disagreement, the tiebreaker.
pub fn judge_relevance(
    gt_id: &str,
    gt_text: &str,
    candidate_feature_id: usize,
    candidate_text: &str,
    primaries: (&dyn Judge, &dyn Judge),
    tiebreaker: &dyn Judge,
) -> RelevanceJudgment {
    let first = primaries.0.assess_relevance(gt_text, candidate_text);
    let second = primaries.1.assess_relevance(gt_text, candidate_text);

    let mut judgment = RelevanceJudgment {
        gt_id: gt_id.to_string(),
        candidate_feature_id,
        gt_entities: BTreeSet::new(),
        gt_operations: BTreeSet::new(),
        candidate_entities: BTreeSet::new(),
        candidate_operations: BTreeSet::new(),
        votes: Vec::new(),
        final_relevant: false,
        tiebreak_used: false,
        available: false,
    };
    if let Ok(a) = first.as_ref().or(second.as_ref()) {
        judgment.gt_entities = a.gt_entities.clone();
        judgment.gt_operations = a.gt_operations.clone();
        judgment.candidate_entities = a.cand_entities.clone();
        judgment.candidate_operations = a.cand_operations.clone();
    }
    for (judge, outcome) in [(primaries.0, &first), (primaries.1, &second)] {
        if let Ok(a) = outcome {
            judgment.votes.push(JudgeVote {
                judge: judge.name(),
                verdict: a.relevant,
                rationale: a.rationale.clone(),
            });
        }
    }
    match (&first, &second) {
        (Ok(a), Ok(b)) if a.relevant == b.relevant => {
            judgment.final_relevant = a.relevant;
            judgment.available = true;
        }
        (Ok(_), Ok(_)) => {
            judgment.tiebreak_used = true;
            match tiebreaker.tiebreak_relevance(gt_text, candidate_text, &judgment.votes) {
                Ok((verdict, rationale)) => {
                    judgment.votes.push(JudgeVote {
                        judge: tiebreaker.name(),
                        verdict,
                        rationale,
                    });
                    judgment.final_relevant = verdict;
                    judgment.available = true;
                }
                Err(_) => judgment.available = false,
            }
        }
        _ => judgment.available = false,
    }
    judgment
}

/// Judges Stage-II complete coverage for one ground-truth feature.
/// An empty related set is decided `false` without consulting any
/// judge (and stays available).
pub fn judge_complete_coverage(
    gt_id: &str,
    gt_text: &str,
    related: &[(usize, String)],
    primaries: (&dyn Judge, &dyn Judge),
    tiebreaker: &dyn Judge,
) -> CoverageJudgment {
    let related_feature_ids: Vec<usize> = related.iter().map(|(id, _)| *id).collect();
    let mut judgment = CoverageJudgment {
        gt_id: gt_id.to_string(),
        related_feature_ids,
        votes: Vec::new(),
        final_cc: false,
        tiebreak_used: false,
        available: true,
    };
    if related.is_empty() {
        return judgment;
    }
    let texts: Vec<String> = related.iter().map(|(_, t)| t.clone()).collect();
    let first = primaries.0.assess_coverage(gt_text, &texts);
    let second = primaries.1.assess_coverage(gt_text, &texts);
    for (judge, outcome) in [(primaries.0, &first), (primaries.1, &second)] {
        if let Ok(a) = outcome {
            judgment.votes.push(JudgeVote {
                judge: judge.name(),
                verdict: a.covered,
                rationale: a.rationale.clone(),
            });
        }
    }
    match (&first, &second) {
        (Ok(a), Ok(b)) if a.covered == b.covered => judgment.final_cc = a.covered,
        (Ok(_), Ok(_)) => {
            judgment.tiebreak_used = true;
            match tiebreaker.tiebreak_coverage(gt_text, &texts, &judgment.votes) {
                Ok((verdict, rationale)) => {
                    judgment.votes.push(JudgeVote {
                        judge: tiebreaker.name(),
                        verdict,
                        rationale,
                    });
                    judgment.final_cc = verdict;
                }
                Err(_) => judgment.available = false,
            }
        }
        _ => judgment.available = false,
    }
    judgment
}

// ── retrieval and orchestration ─────────────────────────────────────

/// Top-`k` features by cosine similarity to the ground-truth
/// embedding, descending; exact ties break toward the smaller
/// feature_id. Fewer than `k` features → all of them.
pub fn retrieve_candidates(
    gt_embedding: &[f64],
    features: &[Feature],
    k: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = features
        .iter()
        .map(|f| {
            let s = cosine(gt_embedding, &f.embedding)
                .expect("feature embeddings share the ground-truth embedding dimension");
            (f.feature_id, s)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("cosines are finite").then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    scored
}

/// All Stage-I and Stage-II judgments plus exclusion warnings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgingOutcome {
    pub relevance: Vec<RelevanceJudgment>,
    pub coverage: Vec<CoverageJudgment>,
    pub warnings: Vec<String>,
}

/// Runs the full two-stage protocol: per ground-truth feature,
/// retrieve the top-`k` candidates, judge each pair, then judge
/// complete coverage over the relevant set. `gt_embeddings[i]` must
/// embed `gt.features[i].text` in the feature-embedding space.
pub fn run_judging(
    gt: &GroundTruth,
    gt_embeddings: &[Vec<f64>],
    features: &[Feature],
    primaries: (&dyn Judge, &dyn Judge),
    tiebreaker: &dyn Judge,
    k: usize,
) -> Result<JudgingOutcome, EvalError> {
    if gt_embeddings.len() != gt.features.len() {
        return Err(EvalError::InputMismatch(format!(
            "{} embeddings for {} ground-truth features",
            gt_embeddings.len(),
            gt.features.len()
        )));
    }
    let text_of: std::collections::BTreeMap<usize, String> =
        features.iter().map(|f| (f.feature_id, f.judged_text())).collect();

    let per_gt = exec::map_vec((0..gt.features.len()).collect(), |i| {
        let gt_feature = &gt.features[i];
        let candidates = retrieve_candidates(&gt_embeddings[i], features, k);
        let judgments: Vec<RelevanceJudgment> = candidates
            .iter()
            .map(|&(fid, _)| {
                judge_relevance(
                    &gt_feature.gt_id,
                    &gt_feature.text,
                    fid,
                    &text_of[&fid],
                    primaries,
                    tiebreaker,
                )
            })
            .collect();
        let related: Vec<(usize, String)> = judgments
            .iter()
            .filter(|j| j.available && j.final_relevant)
            .map(|j| (j.candidate_feature_id, text_of[&j.candidate_feature_id].clone()))
            .collect();
        let coverage = judge_complete_coverage(
            &gt_feature.gt_id,
            &gt_feature.text,
            &related,
            primaries,
            tiebreaker,
        );
        (judgments, coverage)
    });

    let mut relevance = Vec::new();
    let mut coverage = Vec::new();
    let mut warnings = Vec::new();
    for (judgments, cov) in per_gt {
        for j in &judgments {
            if !j.available {
                warnings.push(format!(
                    "relevance judgment unavailable for ground truth {} vs feature {}; \
                     excluded from denominators",
                    j.gt_id, j.candidate_feature_id
                ));
            }
        }
        if !cov.available {
            warnings.push(format!(
                "coverage judgment unavailable for ground truth {}; excluded from denominators",
                cov.gt_id
            ));
        }
        relevance.extend(judgments);
        coverage.push(cov);
    }
    Ok(JudgingOutcome { relevance, coverage, warnings })
}

//! Deterministic offline provider.
//!
//! Replies are pure functions of the prompt: summaries echo the
//! method/file identity in a recognizable template, feature and epic
//! drafts enumerate their members, and judge prompts are answered by
//! the same keyword-overlap procedure the offline judge uses. This
//! keeps every pipeline and eval path runnable (and byte-reproducible)
//! without network access.

use crate::embed::{Embedder, HashingEmbedder};
use crate::eval::keywords::{extract_entities, extract_operations, format_set};

use super::{ModelRequest, Provider, ProviderError, Role};

pub struct StubProvider {
    embedder: HashingEmbedder,
}

impl Default for StubProvider {
    fn default() -> Self {
        StubProvider { embedder: HashingEmbedder::default() }
    }
}

impl StubProvider {
    pub fn with_dim(dim: usize) -> Self {
        StubProvider { embedder: HashingEmbedder::new(dim) }
    }
}

/// First value of a `{tag}: value` line, if present.
fn line_value<'a>(prompt: &'a str, tag: &'a str) -> Option<&'a str> {
    line_values(prompt, tag).next()
}

/// All values of `{tag}: value` lines, in prompt order.
fn line_values<'a>(prompt: &'a str, tag: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    prompt.lines().filter_map(move |line| line.strip_prefix(tag).and_then(|r| r.strip_prefix(": ")))
}

fn summarize_method_reply(prompt: &str) -> String {
    let fqn = line_value(prompt, "FQN").unwrap_or("unknown");
    let mut reply = format!("DESCRIPTION: STUB-SUMMARY({fqn})\nWORKFLOW:\n");
    for related in line_values(prompt, "RELATED") {
        reply.push_str(&format!("- STUB-STEP({related})\n"));
    }
    reply.push_str(&format!("QUALITY: STUB-QUALITY({fqn})"));
    reply
}

fn summarize_file_reply(prompt: &str) -> String {
    let path = line_value(prompt, "PATH").unwrap_or("unknown");
    format!("DESCRIPTION: STUB-FILE-SUMMARY({path})")
}

fn feature_reply(prompt: &str) -> String {
    let cluster = line_value(prompt, "CLUSTER").unwrap_or("?");
    let members: Vec<&str> = line_values(prompt, "MEMBER").collect();
    let joined = members.join(", ");
    let entities = extract_entities(&joined);
    let operations = extract_operations(&joined);
    format!(
        "ENTITIES: {}\nOPERATIONS: {}\nTITLE: STUB-FEATURE({cluster})\n\
         DESCRIPTION: STUB-FEATURE-DESC({cluster}) covering {joined}",
        format_set(&entities),
        format_set(&operations),
    )
}

fn epic_reply(prompt: &str) -> String {
    let cluster = line_value(prompt, "CLUSTER").unwrap_or("?");
    let titles: Vec<&str> = line_values(prompt, "FEATURE-TITLE").collect();
    format!(
        "TITLE: STUB-EPIC({cluster})\nDESCRIPTION: STUB-EPIC-DESC({cluster}) aggregating {}",
        titles.join("; ")
    )
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "yes"
    } else {
        "no"
    }
}

/// Stage-I relevance: shared entity *and* shared operation required.
fn relevance_reply(prompt: &str) -> String {
    let gt = line_value(prompt, "GT").unwrap_or("");
    let cand = line_value(prompt, "CANDIDATE").unwrap_or("");
    let gt_entities = extract_entities(gt);
    let gt_operations = extract_operations(gt);
    let cand_entities = extract_entities(cand);
    let cand_operations = extract_operations(cand);
    let shared_entities: Vec<&String> = gt_entities.intersection(&cand_entities).collect();
    let shared_operations: Vec<&String> = gt_operations.intersection(&cand_operations).collect();
    let relevant = !shared_entities.is_empty() && !shared_operations.is_empty();
    format!(
        "GT-ENTITIES: {}\nGT-OPERATIONS: {}\nCAND-ENTITIES: {}\nCAND-OPERATIONS: {}\n\
         RELEVANT: {}\nRATIONALE: shared entities [{}], shared operations [{}]",
        format_set(&gt_entities),
        format_set(&gt_operations),
        format_set(&cand_entities),
        format_set(&cand_operations),
        yes_no(relevant),
        shared_entities.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
        shared_operations.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
    )
}

/// Stage-II coverage: the union of related features must subsume the
/// ground-truth entity and operation sets.
fn coverage_reply(prompt: &str) -> String {
    let gt = line_value(prompt, "GT").unwrap_or("");
    let related = line_values(prompt, "RELATED").collect::<Vec<_>>().join(" ");
    let gt_entities = extract_entities(gt);
    let gt_operations = extract_operations(gt);
    let union_entities = extract_entities(&related);
    let union_operations = extract_operations(&related);
    let covered =
        gt_entities.is_subset(&union_entities) && gt_operations.is_subset(&union_operations);
    format!(
        "UNION-ENTITIES: {}\nUNION-OPERATIONS: {}\nCOVERED: {}\n\
         RATIONALE: ground truth needs [{}] / [{}]",
        format_set(&union_entities),
        format_set(&union_operations),
        yes_no(covered),
        format_set(&gt_entities),
        format_set(&gt_operations),
    )
}

/// Tiebreak: re-derives the verdict from the texts; the recorded
/// disagreement is context only.
fn tiebreak_reply(prompt: &str) -> String {
    let body = match line_value(prompt, "TASK") {
        Some("coverage") => coverage_reply(prompt),
        _ => relevance_reply(prompt),
    };
    let verdict = body
        .lines()
        .find_map(|l| {
            l.strip_prefix("RELEVANT: ").or_else(|| l.strip_prefix("COVERED: "))
        })
        .unwrap_or("no");
    format!("VERDICT: {verdict}\nRATIONALE: STUB-TIEBREAK recomputed from texts")
}

impl Provider for StubProvider {
    fn model_name(&self) -> &str {
        "stub"
    }

    fn embed_dim(&self) -> usize {
        self.embedder.dim()
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, ProviderError> {
        Ok(match req.role {
            Role::SummarizeMethod => summarize_method_reply(&req.prompt),
            Role::SummarizeFile => summarize_file_reply(&req.prompt),
            Role::Feature => feature_reply(&req.prompt),
            Role::Epic => epic_reply(&req.prompt),
            Role::Judge => match line_value(&req.prompt, "TASK") {
                Some("coverage") => coverage_reply(&req.prompt),
                _ => relevance_reply(&req.prompt),
            },
            Role::Tiebreak => tiebreak_reply(&req.prompt),
        })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.embedder.embed(text).map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}

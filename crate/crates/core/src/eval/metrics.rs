//! Coverage (C, CB, CC) and traceability (P, R, F1) metrics over the
//! judged comparison.
//!
//! Exclusion policy: a ground-truth feature whose Stage-I or Stage-II
//! judgments include an unavailable one leaves the denominator of both
//! C and CC (the same exclusion set, which preserves CC ≤ C). A
//! generated feature is excluded from the CB denominator only when it
//! had at least one failed judgment and no successful relevant
//! verdict — a confirmed-relevant feature stays counted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::judges::{CoverageJudgment, RelevanceJudgment};
use super::EvalError;

/// Coverage rates with their effective denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageScores {
    /// Fraction of manual features with ≥ 1 relevant candidate.
    pub c: f64,
    /// Fraction of generated features relevant to ≥ 1 manual feature.
    pub cb: f64,
    /// Fraction of manual features judged completely covered.
    pub cc: f64,
    pub manual_denominator: usize,
    pub manual_excluded: usize,
    pub generated_denominator: usize,
    pub generated_excluded: usize,
}

/// Computes C, CB, and CC from the full judgment sets.
///
/// `n_manual` / `n_generated` are the fixture sizes before exclusions;
/// judgments must cover only those items.
pub fn coverage_metrics(
    relevance: &[RelevanceJudgment],
    coverage: &[CoverageJudgment],
    n_manual: usize,
    n_generated: usize,
) -> Result<CoverageScores, EvalError> {
    let mut gt_excluded: BTreeSet<&str> = BTreeSet::new();
    let mut gt_relevant: BTreeSet<&str> = BTreeSet::new();
    for j in relevance {
        if !j.available {
            gt_excluded.insert(&j.gt_id);
        } else if j.final_relevant {
            gt_relevant.insert(&j.gt_id);
        }
    }
    let mut gt_covered: BTreeSet<&str> = BTreeSet::new();
    for j in coverage {
        if !j.available {
            gt_excluded.insert(&j.gt_id);
        } else if j.final_cc {
            gt_covered.insert(&j.gt_id);
        }
    }
    if gt_excluded.len() > n_manual {
        return Err(EvalError::InputMismatch(format!(
            "{} excluded ground-truth features exceed n_manual={n_manual}",
            gt_excluded.len()
        )));
    }
    let manual_denominator = n_manual - gt_excluded.len();
    if manual_denominator == 0 {
        return Err(EvalError::ZeroDenominator(
            "no ground-truth features left after exclusions".into(),
        ));
    }

    // Generated side: track per-feature success and failure.
    let mut gen_relevant: BTreeSet<usize> = BTreeSet::new();
    let mut gen_failed: BTreeSet<usize> = BTreeSet::new();
    for j in relevance {
        if !j.available {
            gen_failed.insert(j.candidate_feature_id);
        } else if j.final_relevant {
            gen_relevant.insert(j.candidate_feature_id);
        }
    }
    let gen_excluded: BTreeSet<usize> =
        gen_failed.difference(&gen_relevant).copied().collect();
    if gen_excluded.len() > n_generated {
        return Err(EvalError::InputMismatch(format!(
            "{} excluded generated features exceed n_generated={n_generated}",
            gen_excluded.len()
        )));
    }
    let generated_denominator = n_generated - gen_excluded.len();
    if generated_denominator == 0 {
        return Err(EvalError::ZeroDenominator(
            "no generated features left after exclusions".into(),
        ));
    }

    let count = |set: &BTreeSet<&str>| set.iter().filter(|id| !gt_excluded.contains(*id)).count();
    Ok(CoverageScores {
        c: count(&gt_relevant) as f64 / manual_denominator as f64,
        cb: gen_relevant.len() as f64 / generated_denominator as f64,
        cc: count(&gt_covered) as f64 / manual_denominator as f64,
        manual_denominator,
        manual_excluded: gt_excluded.len(),
        generated_denominator,
        generated_excluded: gen_excluded.len(),
    })
}

/// How generated-link correctness uses the relevance map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStrictness {
    /// A generated link (f, file) is correct only when some manual
    /// feature relevant to f links that file (the default).
    RelevantFeature,
    /// A generated link is correct when any manual feature links the
    /// file, regardless of relevance.
    AnyManual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub strictness: TraceStrictness,
}

/// Traceability precision/recall over file-level links.
///
/// `generated` holds (feature_id, file path) pairs, `manual` holds
/// (gt_id, file path) pairs, and `relevance` the Stage-I-relevant
/// (feature_id, gt_id) pairs.
pub fn trace_metrics(
    generated: &[(usize, String)],
    manual: &[(String, String)],
    relevance: &BTreeSet<(usize, String)>,
    strictness: TraceStrictness,
) -> Result<TraceScores, EvalError> {
    if generated.is_empty() || manual.is_empty() {
        return Err(EvalError::ZeroDenominator(format!(
            "trace metrics need non-empty link sets ({} generated, {} manual)",
            generated.len(),
            manual.len()
        )));
    }
    let generated: BTreeSet<&(usize, String)> = generated.iter().collect();
    let manual: BTreeSet<&(String, String)> = manual.iter().collect();

    let mut manual_files_of_gt: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut all_manual_files: BTreeSet<&str> = BTreeSet::new();
    for (gt, file) in &manual {
        manual_files_of_gt.entry(gt).or_default().insert(file);
        all_manual_files.insert(file);
    }
    let mut relevant_gts_of: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    let mut relevant_features_of: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (fid, gt) in relevance {
        relevant_gts_of.entry(*fid).or_default().insert(gt);
        relevant_features_of.entry(gt).or_default().insert(*fid);
    }

    let correct = generated
        .iter()
        .filter(|(fid, file)| match strictness {
            TraceStrictness::RelevantFeature => relevant_gts_of
                .get(fid)
                .is_some_and(|gts| {
                    gts.iter().any(|gt| {
                        manual_files_of_gt
                            .get(gt)
                            .is_some_and(|files| files.contains(file.as_str()))
                    })
                }),
            TraceStrictness::AnyManual => all_manual_files.contains(file.as_str()),
        })
        .count();

    let generated_files_of: BTreeMap<usize, BTreeSet<&str>> = {
        let mut m: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
        for (fid, file) in &generated {
            m.entry(*fid).or_default().insert(file);
        }
        m
    };
    let all_generated_files: BTreeSet<&str> =
        generated.iter().map(|(_, file)| file.as_str()).collect();
    let covered = manual
        .iter()
        .filter(|(gt, file)| match strictness {
            TraceStrictness::RelevantFeature => relevant_features_of
                .get(gt.as_str())
                .is_some_and(|fids| {
                    fids.iter().any(|fid| {
                        generated_files_of
                            .get(fid)
                            .is_some_and(|files| files.contains(file.as_str()))
                    })
                }),
            TraceStrictness::AnyManual => all_generated_files.contains(file.as_str()),
        })
        .count();

    let precision = correct as f64 / generated.len() as f64;
    let recall = covered as f64 / manual.len() as f64;
    Ok(TraceScores { precision, recall, f1: f1_of(precision, recall), strictness })
}

/// Harmonic mean, zero when both rates are zero.
pub fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

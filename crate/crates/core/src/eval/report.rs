//! Aggregate evaluation report: coverage, trace, Link@k, and
//! judge-agreement statistics in one serializable bundle, with a
//! self-check that the derived numbers are internally consistent.

use serde::{Deserialize, Serialize};

use super::agreement::{cohen_kappa, KappaResult, SpearmanResult};
use super::judges::{CoverageJudgment, RelevanceJudgment};
use super::linkk::LinkAtK;
use super::metrics::{CoverageScores, TraceScores};
use super::EvalError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub coverage: Option<CoverageScores>,
    pub trace: Option<TraceScores>,
    pub link_at_k: Vec<LinkAtK>,
    pub kappa: Option<KappaResult>,
    pub spearman: Option<SpearmanResult>,
    pub relevance_judgments: Vec<RelevanceJudgment>,
    pub coverage_judgments: Vec<CoverageJudgment>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Checks every score is a valid rate and every F1 really is the
    /// harmonic mean of its own precision and recall.
    pub fn validate(&self) -> Result<(), EvalError> {
        fn rate(name: &str, v: f64) -> Result<(), EvalError> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(EvalError::InputMismatch(format!("{name} = {v} is not in [0, 1]")));
            }
            Ok(())
        }
        fn f1_consistent(name: &str, p: f64, r: f64, f1: f64) -> Result<(), EvalError> {
            let expect = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            if (f1 - expect).abs() > 1e-9 {
                return Err(EvalError::InputMismatch(format!(
                    "{name} f1 = {f1} but harmonic mean of ({p}, {r}) is {expect}"
                )));
            }
            Ok(())
        }
        if let Some(c) = &self.coverage {
            rate("coverage.c", c.c)?;
            rate("coverage.cb", c.cb)?;
            rate("coverage.cc", c.cc)?;
            if c.cc > c.c + 1e-12 {
                return Err(EvalError::InputMismatch(format!(
                    "complete coverage {} exceeds coverage {}",
                    c.cc, c.c
                )));
            }
        }
        if let Some(t) = &self.trace {
            rate("trace.precision", t.precision)?;
            rate("trace.recall", t.recall)?;
            rate("trace.f1", t.f1)?;
            f1_consistent("trace", t.precision, t.recall, t.f1)?;
        }
        for l in &self.link_at_k {
            let name = format!("link@{}", l.k);
            rate(&format!("{name}.precision"), l.precision)?;
            rate(&format!("{name}.recall"), l.recall)?;
            rate(&format!("{name}.f1"), l.f1)?;
            f1_consistent(&name, l.precision, l.recall, l.f1)?;
        }
        if let Some(k) = &self.kappa {
            if !k.value.is_finite() || k.value < -1.0 - 1e-12 || k.value > 1.0 + 1e-12 {
                return Err(EvalError::InputMismatch(format!(
                    "kappa {} outside [-1, 1]",
                    k.value
                )));
            }
        }
        if let Some(s) = &self.spearman {
            if let Some(rho) = s.rho {
                if !rho.is_finite() || rho < -1.0 - 1e-12 || rho > 1.0 + 1e-12 {
                    return Err(EvalError::InputMismatch(format!(
                        "spearman rho {rho} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable one-page summary.
    pub fn render_markdown(&self) -> String {
        let mut out = String::from("# Evaluation report\n");
        if let Some(c) = &self.coverage {
            out.push_str("\n## Coverage\n\n");
            out.push_str(&format!(
                "- Coverage (C): {:.4} ({} manual features, {} excluded)\n",
                c.c, c.manual_denominator, c.manual_excluded
            ));
            out.push_str(&format!("- Complete coverage (CC): {:.4}\n", c.cc));
            out.push_str(&format!(
                "- Backward coverage (CB): {:.4} ({} generated features, {} excluded)\n",
                c.cb, c.generated_denominator, c.generated_excluded
            ));
        }
        if let Some(t) = &self.trace {
            out.push_str("\n## Trace links\n\n");
            out.push_str(&format!(
                "- Precision {:.4}, recall {:.4}, F1 {:.4} ({:?} strictness)\n",
                t.precision, t.recall, t.f1, t.strictness
            ));
        }
        if !self.link_at_k.is_empty() {
            out.push_str("\n## Link@k\n\n");
            out.push_str("| k | precision | recall | F1 | commits |\n");
            out.push_str("|---|-----------|--------|----|---------|\n");
            for l in &self.link_at_k {
                out.push_str(&format!(
                    "| {} | {:.4} | {:.4} | {:.4} | {} |\n",
                    l.k, l.precision, l.recall, l.f1, l.commits_evaluated
                ));
            }
        }
        if self.kappa.is_some() || self.spearman.is_some() {
            out.push_str("\n## Judge agreement\n\n");
            if let Some(k) = &self.kappa {
                out.push_str(&format!(
                    "- Cohen's kappa: {:.4}{}\n",
                    k.value,
                    if k.degenerate { " (degenerate margins)" } else { "" }
                ));
            }
            if let Some(s) = &self.spearman {
                match s.rho {
                    Some(rho) => out.push_str(&format!("- Spearman rho: {rho:.4}\n")),
                    None => out.push_str("- Spearman rho: undefined (zero rank variance)\n"),
                }
            }
        }
        if !self.warnings.is_empty() {
            out.push_str("\n## Warnings\n\n");
            for w in &self.warnings {
                out.push_str(&format!("- {w}\n"));
            }
        }
        out
    }
}

/// Cohen's kappa between the first two primary judges, computed over
/// relevance judgments where both cast a successful vote. Returns
/// `None` when fewer than one such judgment exists or only one judge
/// ever voted.
pub fn primary_judge_kappa(
    judgments: &[RelevanceJudgment],
) -> Result<Option<KappaResult>, EvalError> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for j in judgments {
        let successful: Vec<&super::judges::JudgeVote> =
            j.votes.iter().filter(|v| !v.judge.is_empty()).collect();
        if j.tiebreak_used {
            // Last vote is the tiebreaker's; the two before it are the
            // primaries.
            if successful.len() >= 3 {
                a.push(successful[0].verdict);
                b.push(successful[1].verdict);
            }
        } else if successful.len() >= 2 {
            a.push(successful[0].verdict);
            b.push(successful[1].verdict);
        }
    }
    if a.is_empty() {
        return Ok(None);
    }
    cohen_kappa(&a, &b).map(Some)
}

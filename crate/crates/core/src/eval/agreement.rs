//! Inter-judge agreement (Cohen's κ) and rank correlation
//! (Spearman's ρ with average ranks on ties).

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub value: f64,
    /// True when chance agreement p_e = 1 forced the defined-as-zero
    /// convention.
    pub degenerate: bool,
}

/// Cohen's κ between two aligned boolean verdict lists.
///
/// Perfect observed agreement is 1.0 even when p_e = 1; otherwise
/// p_e = 1 (both judges constant, disagreeing) is defined as 0 and
/// flagged.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<KappaResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(EvalError::InputMismatch("kappa needs at least one verdict pair".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    if p_o == 1.0 {
        return Ok(KappaResult { value: 1.0, degenerate: false });
    }
    let a_yes = a.iter().filter(|&&v| v).count() as f64 / n;
    let b_yes = b.iter().filter(|&&v| v).count() as f64 / n;
    let p_e = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
    if p_e == 1.0 {
        return Ok(KappaResult { value: 0.0, degenerate: true });
    }
    Ok(KappaResult { value: (p_o - p_e) / (1.0 - p_e), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    /// `None` when a series has zero rank variance (constant input).
    pub rho: Option<f64>,
    pub degenerate: bool,
}

/// Average ranks (1-based); tied values share the mean of their
/// positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the average 1-based rank.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of the average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<SpearmanResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(EvalError::InputMismatch("spearman needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::InputMismatch("spearman inputs must be finite".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mean = |r: &[f64]| r.iter().sum::<f64>() / n;
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return Ok(SpearmanResult { rho: None, degenerate: true });
    }
    Ok(SpearmanResult { rho: Some(cov / (vx * vy).sqrt()), degenerate: false })
}

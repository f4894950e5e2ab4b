//! Adjusted Rand Index between two partitions.

use super::{ClusterError, Partition};

/// Adjusted Rand Index from the pair-counting contingency table.
///
/// Identical partitions score exactly 1.0 — including the degenerate
/// all-singleton and all-in-one cases where the correction denominator
/// vanishes. A vanishing denominator on *non*-identical partitions
/// (impossible for it to arise with the early return in place, kept as
/// a guard) scores 0.0.
pub fn adjusted_rand_index(p1: &Partition, p2: &Partition) -> Result<f64, ClusterError> {
    if p1.n_nodes() != p2.n_nodes() {
        return Err(ClusterError::SizeMismatch(format!(
            "partitions cover {} vs {} nodes",
            p1.n_nodes(),
            p2.n_nodes()
        )));
    }
    // Canonical labelings make set-partition equality a label-vector
    // comparison.
    if p1 == p2 {
        return Ok(1.0);
    }

    let (k1, k2) = (p1.n_communities(), p2.n_communities());
    let mut table = vec![vec![0u64; k2]; k1];
    for (a, b) in p1.labels().iter().zip(p2.labels()) {
        table[*a][*b] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;

    let index: f64 = table.iter().flatten().map(|&n| choose2(n)).sum();
    let sum_rows: f64 = p1.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let sum_cols: f64 = p2.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let total = choose2(p1.n_nodes() as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;

    if (max_index - expected).abs() < f64::EPSILON {
        return Ok(0.0);
    }
    Ok((index - expected) / (max_index - expected))
}

//! Weighted-graph clustering: CPM quality, Leiden, γ auto-tuning, and
//! the two-level file → method hierarchy.
//!
//! Adjacency and semantic-similarity matrices are blended into a
//! [`WeightedGraph`], which [`leiden`] partitions under the constant
//! Potts model objective
//!
//! ```text
//! Q_γ = Σ_c ( Σ_{i<j ∈ c} A_ij − γ · C(n_c, 2) )
//! ```
//!
//! The resolution γ is auto-tuned over a logarithmic grid by maximizing
//! `stability + separation − small_cluster_fraction` (coefficients
//! configurable). [`hierarchical_cluster`] runs the whole stack: files
//! first, then methods within each file cluster.

mod ari;
mod cpm;
mod hierarchy;
mod leiden;
mod tuning;

pub use ari::adjusted_rand_index;
pub use cpm::{cpm_merge_delta, cpm_quality};
pub use hierarchy::{
    blend_weights, hierarchical_cluster, BlendVariant, ClusterLevels, ClusterOutcome,
    FileClusterMethods, Hierarchy, HierarchyConfig,
};
pub use leiden::leiden;
pub use tuning::{
    auto_tune_gamma, auto_tune_gamma_weighted, log_grid, separation, small_cluster_fraction,
    stability, GammaRecord, GammaSelection, GridSpec, ScoreCoefficients,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from clustering operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    /// Inputs disagree on node count or entity level.
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    /// A community label outside the partition's range.
    #[error("unknown community label {0}")]
    UnknownLabel(usize),
}

/// Strict-improvement threshold shared by all greedy steps.
pub(crate) const EPS: f64 = 1e-12;

// ── weighted graph ──────────────────────────────────────────────────

/// Undirected weighted graph with non-negative weights and no self-loops.
///
/// Edges are stored once in canonical `(i, j, w)` form with `i < j`;
/// symmetry is implied by undirectedness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Builds a graph, canonicalizing edge order, merging duplicates by
    /// summation, and dropping zero weights.
    ///
    /// # Panics
    /// Panics on self-loops, negative weights, or out-of-range indices —
    /// those are construction bugs, not runtime conditions.
    pub fn new(n: usize, raw: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in raw {
            assert!(a != b, "self-loop at node {a}");
            assert!(a < n && b < n, "edge ({a},{b}) out of range for n={n}");
            assert!(w >= 0.0, "negative weight {w} on edge ({a},{b})");
            if w > 0.0 {
                *acc.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
            }
        }
        WeightedGraph {
            n,
            edges: acc.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        }
    }

    /// Neighbor lists `(neighbor, weight)` sorted by neighbor index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    /// Sum of all edge weights.
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }
}

// ── partition ───────────────────────────────────────────────────────

/// Assignment of nodes to communities with dense labels `0..k`.
///
/// Labels are canonical: community 0 is the community of the smallest
/// node index, community 1 the next new one encountered, and so on. Two
/// canonical partitions are equal as set partitions iff their label
/// vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels by first occurrence.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &l in raw {
            let next = remap.len();
            labels.push(*remap.entry(l).or_insert(next));
        }
        let k = remap.len();
        Partition { labels, k }
    }

    /// Every node in its own community.
    pub fn singletons(n: usize) -> Self {
        Partition { labels: (0..n).collect(), k: n }
    }

    /// All nodes in one community (k = 0 when n = 0).
    pub fn all_in_one(n: usize) -> Self {
        Partition { labels: vec![0; n], k: usize::from(n > 0) }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_communities(&self) -> usize {
        self.k
    }

    pub fn label_of(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Community sizes indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Node lists per community, each ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (node, &l) in self.labels.iter().enumerate() {
            out[l].push(node);
        }
        out
    }
}

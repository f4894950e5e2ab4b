//! Resolution (γ) auto-tuning: stability, separation, small-cluster
//! fraction, and the log-grid search that combines them.

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::summarize::SimilarityMatrix;

use super::{adjusted_rand_index, leiden, Partition, WeightedGraph};

/// Logarithmic γ grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { gamma_min: 1e-3, gamma_max: 1.0, points: 16 }
    }
}

/// Weights of the combined score terms. Defaults reproduce
/// `stability + separation − small_cluster_fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreCoefficients {
    pub stability: f64,
    pub separation: f64,
    pub small_cluster_fraction: f64,
}

impl Default for ScoreCoefficients {
    fn default() -> Self {
        ScoreCoefficients { stability: 1.0, separation: 1.0, small_cluster_fraction: -1.0 }
    }
}

/// Outcome at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRecord {
    pub gamma: f64,
    pub stability: f64,
    pub separation: f64,
    pub small_cluster_fraction: f64,
    pub combined_score: f64,
    /// The first-seed leiden run at this γ.
    pub representative_partition: Partition,
}

/// Full sweep result: per-γ records plus the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub grid: Vec<f64>,
    pub records: Vec<GammaRecord>,
    /// Grid value maximizing the combined score; ties go to the
    /// smallest γ.
    pub chosen_gamma: f64,
}

impl GammaSelection {
    /// The record for `chosen_gamma`.
    pub fn chosen_record(&self) -> &GammaRecord {
        self.records
            .iter()
            .find(|r| r.gamma == self.chosen_gamma)
            .expect("chosen_gamma is always a grid point")
    }
}

/// `points` values log-spaced over `[gamma_min, gamma_max]` inclusive.
///
/// # Panics
/// Panics unless `gamma_min > 0`, `gamma_max >= gamma_min`, and
/// `points >= 2`.
pub fn log_grid(spec: &GridSpec) -> Vec<f64> {
    assert!(spec.gamma_min > 0.0, "gamma_min must be positive");
    assert!(spec.gamma_max >= spec.gamma_min, "gamma_max below gamma_min");
    assert!(spec.points >= 2, "a grid needs at least 2 points");
    let (lo, hi) = (spec.gamma_min.log10(), spec.gamma_max.log10());
    (0..spec.points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (spec.points - 1) as f64))
        .collect()
}

/// Mean pairwise ARI over leiden restarts with the given seeds.
///
/// # Panics
/// Panics with fewer than two seeds — a single run has no pairs.
pub fn stability(g: &WeightedGraph, gamma: f64, seeds: &[u64]) -> f64 {
    let partitions = partitions_for_seeds(g, gamma, seeds);
    mean_pairwise_ari(&partitions)
}

pub(crate) fn partitions_for_seeds(g: &WeightedGraph, gamma: f64, seeds: &[u64]) -> Vec<Partition> {
    exec::map_vec(seeds.to_vec(), |seed| leiden(g, gamma, seed))
}

pub(crate) fn mean_pairwise_ari(partitions: &[Partition]) -> f64 {
    assert!(partitions.len() >= 2, "stability needs K >= 2 restarts");
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..partitions.len() {
        for j in i + 1..partitions.len() {
            total += adjusted_rand_index(&partitions[i], &partitions[j])
                .expect("restarts share one node set");
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Separation `W − O`: size-weighted mean within-cluster similarity
/// minus mean cross-cluster similarity.
///
/// `W` averages `mean_{i<j ∈ c}(s_ij)` over clusters with ≥ 2 nodes,
/// weighted by cluster size; singletons (including isolated nodes)
/// contribute nothing to it. `O` is the plain mean over all
/// cross-cluster pairs. A missing side (no within pairs, or a single
/// cluster with no cross pairs) counts as 0.
pub fn separation(p: &Partition, sim: &SimilarityMatrix) -> f64 {
    debug_assert_eq!(p.n_nodes(), sim.n, "partition must cover the matrix");
    let mut weighted_within = 0.0;
    let mut within_mass = 0.0;
    for community in p.communities() {
        let size = community.len();
        if size < 2 {
            continue;
        }
        let mut total = 0.0;
        for (a, &i) in community.iter().enumerate() {
            for &j in &community[a + 1..] {
                total += sim.get(i, j);
            }
        }
        let pairs = (size * (size - 1) / 2) as f64;
        weighted_within += size as f64 * (total / pairs);
        within_mass += size as f64;
    }
    let w = if within_mass > 0.0 { weighted_within / within_mass } else { 0.0 };

    let mut cross_total = 0.0;
    let mut cross_pairs = 0usize;
    for i in 0..p.n_nodes() {
        for j in i + 1..p.n_nodes() {
            if p.label_of(i) != p.label_of(j) {
                cross_total += sim.get(i, j);
                cross_pairs += 1;
            }
        }
    }
    let o = if cross_pairs > 0 { cross_total / cross_pairs as f64 } else { 0.0 };
    w - o
}

/// Fraction of nodes living in clusters of size ≤ 2.
pub fn small_cluster_fraction(p: &Partition) -> f64 {
    if p.n_nodes() == 0 {
        return 0.0;
    }
    let small: usize = p.sizes().iter().filter(|&&s| s <= 2).sum();
    small as f64 / p.n_nodes() as f64
}

/// Sweeps the γ grid with `restarts` seed restarts (seeds `1..=K`) and
/// picks the combined-score maximizer, ties toward the smallest γ.
pub fn auto_tune_gamma(
    g: &WeightedGraph,
    sim: &SimilarityMatrix,
    grid_spec: &GridSpec,
    restarts: usize,
) -> GammaSelection {
    auto_tune_gamma_weighted(g, sim, grid_spec, restarts, ScoreCoefficients::default())
}

/// [`auto_tune_gamma`] with explicit score-term coefficients.
pub fn auto_tune_gamma_weighted(
    g: &WeightedGraph,
    sim: &SimilarityMatrix,
    grid_spec: &GridSpec,
    restarts: usize,
    coefficients: ScoreCoefficients,
) -> GammaSelection {
    assert!(restarts >= 2, "gamma tuning needs K >= 2 restarts");
    let grid = log_grid(grid_spec);
    let seeds: Vec<u64> = (1..=restarts as u64).collect();

    let records: Vec<GammaRecord> = exec::map_vec(grid.clone(), |gamma| {
        let partitions = partitions_for_seeds(g, gamma, &seeds);
        let stability = mean_pairwise_ari(&partitions);
        let representative = partitions.into_iter().next().expect("K >= 2");
        let separation = separation(&representative, sim);
        let small = small_cluster_fraction(&representative);
        let combined = coefficients.stability * stability
            + coefficients.separation * separation
            + coefficients.small_cluster_fraction * small;
        GammaRecord {
            gamma,
            stability,
            separation,
            small_cluster_fraction: small,
            combined_score: combined,
            representative_partition: representative,
        }
    });

    // First strict maximum over an ascending grid = smallest γ on ties.
    let mut chosen = 0usize;
    for (i, r) in records.iter().enumerate() {
        if r.combined_score > records[chosen].combined_score {
            chosen = i;
        }
    }
    GammaSelection { grid, chosen_gamma: records[chosen].gamma, records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_ulps_eq;

    fn uniform_sim(n: usize, value: f64) -> SimilarityMatrix {
        SimilarityMatrix::from_fn(n, crate::summarize::MatrixLevel::Method, |i, j| {
            if i == j {
                1.0
            } else {
                value
            }
        })
    }

    #[test]
    fn log_grid_endpoints_and_spacing() {
        let grid = log_grid(&GridSpec { gamma_min: 1e-3, gamma_max: 1.0, points: 4 });
        assert_eq!(grid.len(), 4);
        assert_ulps_eq!(grid[0], 1e-3, max_ulps = 4);
        assert_ulps_eq!(grid[3], 1.0, max_ulps = 4);
        // Log-spaced: constant ratio.
        assert_ulps_eq!(grid[1] / grid[0], grid[2] / grid[1], max_ulps = 8);
    }

    #[test]
    fn stability_one_when_all_runs_agree() {
        // Two far-apart cliques: every seed finds the same split.
        let g = two_cliques();
        let s = stability(&g, 0.5, &[1, 2, 3, 4, 5]);
        assert_ulps_eq!(s, 1.0, max_ulps = 4);
    }

    #[test]
    fn stability_with_two_seeds_is_their_ari() {
        let g = two_cliques();
        let p1 = leiden(&g, 0.5, 1);
        let p2 = leiden(&g, 0.5, 2);
        let expected = adjusted_rand_index(&p1, &p2).unwrap();
        assert_ulps_eq!(stability(&g, 0.5, &[1, 2]), expected, max_ulps = 4);
    }

    #[test]
    fn separation_perfectly_separable() {
        // Within pairs all 1.0, cross pairs all 0.0 → 1.0.
        let sim = SimilarityMatrix::from_fn(4, crate::summarize::MatrixLevel::Method, |i, j| {
            usize::from((i < 2) == (j < 2)) as f64
        });
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert_ulps_eq!(separation(&p, &sim), 1.0, max_ulps = 4);
    }

    #[test]
    fn separation_single_cluster_has_no_cross_term() {
        let sim = uniform_sim(3, 0.4);
        let p = Partition::all_in_one(3);
        assert_ulps_eq!(separation(&p, &sim), 0.4, max_ulps = 4);
    }

    #[test]
    fn separation_all_singletons_is_minus_cross_mean() {
        let sim = uniform_sim(3, 0.25);
        let p = Partition::singletons(3);
        assert_ulps_eq!(separation(&p, &sim), -0.25, max_ulps = 4);
    }

    #[test]
    fn small_cluster_fraction_counts_nodes() {
        // Sizes {1, 2, 3} over 6 nodes → 3/6.
        let p = Partition::from_labels(&[0, 1, 1, 2, 2, 2]);
        assert_ulps_eq!(small_cluster_fraction(&p), 0.5, max_ulps = 4);
        assert_ulps_eq!(small_cluster_fraction(&Partition::all_in_one(3)), 0.0, max_ulps = 4);
        assert_ulps_eq!(small_cluster_fraction(&Partition::singletons(5)), 1.0, max_ulps = 4);
    }

    fn two_cliques() -> WeightedGraph {
        let mut edges = Vec::new();
        for a in 0..4usize {
            for b in a + 1..4 {
                edges.push((a, b, 1.0));
                edges.push((a + 4, b + 4, 1.0));
            }
        }
        WeightedGraph::new(8, edges)
    }

    #[test]
    fn two_cliques_tuning_finds_the_clique_split() {
        let g = two_cliques();
        // Similarity mirrors the clique structure.
        let sim = SimilarityMatrix::from_fn(8, crate::summarize::MatrixLevel::Method, |i, j| {
            if (i < 4) == (j < 4) {
                if i == j {
                    1.0
                } else {
                    0.9
                }
            } else {
                0.05
            }
        });
        let sel = auto_tune_gamma(&g, &sim, &GridSpec::default(), 5);
        let chosen = sel.chosen_record();
        assert_eq!(chosen.representative_partition.n_communities(), 2);
        assert_ulps_eq!(chosen.stability, 1.0, max_ulps = 4);
        assert_ulps_eq!(chosen.small_cluster_fraction, 0.0, max_ulps = 4);
    }

    #[test]
    fn ties_choose_the_smallest_gamma() {
        // An empty graph scores identically at every γ: all runs are
        // all-singletons, stability 1, separation −mean, scf 1.
        let g = WeightedGraph::new(4, vec![]);
        let sim = uniform_sim(4, 0.2);
        let sel = auto_tune_gamma(&g, &sim, &GridSpec { gamma_min: 0.01, gamma_max: 1.0, points: 5 }, 3);
        assert_ulps_eq!(sel.chosen_gamma, 0.01, max_ulps = 4);
        let scores: Vec<f64> = sel.records.iter().map(|r| r.combined_score).collect();
        for s in &scores {
            assert_ulps_eq!(*s, scores[0], max_ulps = 4);
        }
    }

    #[test]
    fn selection_is_reproducible() {
        let g = two_cliques();
        let sim = uniform_sim(8, 0.3);
        let a = auto_tune_gamma(&g, &sim, &GridSpec::default(), 4);
        let b = auto_tune_gamma(&g, &sim, &GridSpec::default(), 4);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

//! Matrix blending and the file → method clustering hierarchy.

use serde::{Deserialize, Serialize};

use crate::repo_graph::{AdjacencyMatrix, RepoModel};
use crate::summarize::SimilarityMatrix;

use super::{
    auto_tune_gamma_weighted, ClusterError, GammaSelection, GridSpec, Partition,
    ScoreCoefficients, WeightedGraph,
};

/// Which matrices feed edge weights (the ablation axis "w/o Adj" /
/// "w/o SS" maps to the two `_only` variants).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendVariant {
    Blended,
    #[serde(alias = "adj-only")]
    AdjacencyOnly,
    #[serde(alias = "sim-only")]
    SimilarityOnly,
}

/// Which levels actually cluster (the ablation axis "w/o FLC" /
/// "w/o MLC" maps to `method_only` / `file_only`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLevels {
    Hierarchical,
    #[serde(alias = "file-only")]
    FileOnly,
    #[serde(alias = "method-only")]
    MethodOnly,
}

/// Full clustering configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Adjacency weight in the blend; similarity gets `1 − alpha`.
    pub alpha: f64,
    /// Sparsity threshold: blended entries below `tau` are dropped.
    pub tau: f64,
    pub variant: BlendVariant,
    pub levels: ClusterLevels,
    pub grid: GridSpec,
    /// Seed restarts per γ (seeds `1..=restarts`).
    pub restarts: usize,
    pub coefficients: ScoreCoefficients,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            alpha: 0.5,
            tau: 0.05,
            variant: BlendVariant::Blended,
            levels: ClusterLevels::Hierarchical,
            grid: GridSpec::default(),
            restarts: 5,
            coefficients: ScoreCoefficients::default(),
        }
    }
}

/// Methods of one file cluster with their local partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileClusterMethods {
    /// File-cluster label this group belongs to.
    pub file_cluster: usize,
    /// Global method IDs, ascending.
    pub method_ids: Vec<usize>,
    /// Partition over positions of `method_ids`.
    pub partition: Partition,
    /// Local community label → global method-cluster ID.
    pub global_cluster_ids: Vec<usize>,
}

/// Two-level clustering result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub file_partition: Partition,
    /// One group per file cluster, in label order.
    pub method_partitions: Vec<FileClusterMethods>,
    /// Global method-cluster ID per method.
    pub method_cluster_of: Vec<usize>,
    pub n_method_clusters: usize,
}

impl Hierarchy {
    /// Checks the structural invariants: every method is in exactly one
    /// method cluster, and each method cluster's methods live in files
    /// of a single file cluster.
    pub fn validate(&self, model: &RepoModel) -> Result<(), ClusterError> {
        if self.method_cluster_of.len() != model.methods.len() {
            return Err(ClusterError::SizeMismatch(format!(
                "{} cluster assignments for {} methods",
                self.method_cluster_of.len(),
                model.methods.len()
            )));
        }
        let mut file_cluster_of_mc = vec![None; self.n_method_clusters];
        for (m, &mc) in self.method_cluster_of.iter().enumerate() {
            if mc >= self.n_method_clusters {
                return Err(ClusterError::UnknownLabel(mc));
            }
            let fc = self.file_partition.label_of(model.methods[m].file_id);
            match file_cluster_of_mc[mc] {
                None => file_cluster_of_mc[mc] = Some(fc),
                Some(existing) if existing != fc => {
                    return Err(ClusterError::SizeMismatch(format!(
                        "method cluster {mc} spans file clusters {existing} and {fc}"
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Clustering outcome: the hierarchy plus the γ sweeps behind it.
/// Selections are `None` for the level that was not tuned (file level
/// under `method_only`, method level under `file_only`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    pub hierarchy: Hierarchy,
    pub file_selection: Option<GammaSelection>,
    pub method_selection: Option<GammaSelection>,
}

/// Blends adjacency and similarity into a weighted graph:
/// `w_ij = α·a_ij + (1−α)·s_ij`, dropping entries below `tau`.
///
/// `adjacency_only` reproduces the adjacency matrix (no threshold);
/// `similarity_only` thresholds the similarity entries.
pub fn blend_weights(
    adj: &AdjacencyMatrix,
    sim: &SimilarityMatrix,
    alpha: f64,
    variant: BlendVariant,
    tau: f64,
) -> Result<WeightedGraph, ClusterError> {
    if adj.n != sim.n {
        return Err(ClusterError::SizeMismatch(format!(
            "adjacency n={} vs similarity n={}",
            adj.n, sim.n
        )));
    }
    if adj.level != sim.level {
        return Err(ClusterError::SizeMismatch(format!(
            "adjacency level {:?} vs similarity level {:?}",
            adj.level, sim.level
        )));
    }
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0,1]");

    let n = adj.n;
    let adjacent: std::collections::BTreeSet<(usize, usize)> =
        adj.undirected_edges().into_iter().collect();
    let mut edges = Vec::new();
    match variant {
        BlendVariant::AdjacencyOnly => {
            for &(i, j) in &adjacent {
                edges.push((i, j, 1.0));
            }
        }
        BlendVariant::SimilarityOnly => {
            for i in 0..n {
                for j in i + 1..n {
                    let w = sim.get(i, j);
                    if w >= tau {
                        edges.push((i, j, w));
                    }
                }
            }
        }
        BlendVariant::Blended => {
            for i in 0..n {
                for j in i + 1..n {
                    let a = f64::from(adjacent.contains(&(i, j)));
                    let w = alpha * a + (1.0 - alpha) * sim.get(i, j);
                    if w >= tau {
                        edges.push((i, j, w));
                    }
                }
            }
        }
    }
    Ok(WeightedGraph::new(n, edges))
}

/// Runs the configured clustering: file level first, then method level
/// inside each file cluster (cross-file-cluster pairs carry no edges).
pub fn hierarchical_cluster(
    model: &RepoModel,
    adj_file: &AdjacencyMatrix,
    adj_method: &AdjacencyMatrix,
    sim_file: &SimilarityMatrix,
    sim_method: &SimilarityMatrix,
    config: &HierarchyConfig,
) -> Result<ClusterOutcome, ClusterError> {
    let n_files = model.files.len();
    let n_methods = model.methods.len();

    let (file_partition, file_selection) = if config.levels == ClusterLevels::MethodOnly {
        (Partition::all_in_one(n_files), None)
    } else {
        let graph = blend_weights(adj_file, sim_file, config.alpha, config.variant, config.tau)?;
        let selection = auto_tune_gamma_weighted(
            &graph,
            sim_file,
            &config.grid,
            config.restarts,
            config.coefficients,
        );
        let partition = selection.chosen_record().representative_partition.clone();
        (partition, Some(selection))
    };

    let (method_partition, method_selection) = match config.levels {
        ClusterLevels::FileOnly => (None, None),
        ClusterLevels::Hierarchical | ClusterLevels::MethodOnly => {
            let graph =
                blend_weights(adj_method, sim_method, config.alpha, config.variant, config.tau)?;
            let graph = if config.levels == ClusterLevels::Hierarchical {
                restrict_to_file_clusters(&graph, model, &file_partition)
            } else {
                graph
            };
            let selection = auto_tune_gamma_weighted(
                &graph,
                sim_method,
                &config.grid,
                config.restarts,
                config.coefficients,
            );
            let partition = selection.chosen_record().representative_partition.clone();
            (Some(partition), Some(selection))
        }
    };

    let hierarchy = assemble_hierarchy(model, file_partition, method_partition, n_methods);
    debug_assert!(hierarchy.validate(model).is_ok());
    Ok(ClusterOutcome { hierarchy, file_selection, method_selection })
}

/// Drops method-graph edges whose endpoints live in different file
/// clusters, so per-cluster clustering is one global leiden run.
fn restrict_to_file_clusters(
    g: &WeightedGraph,
    model: &RepoModel,
    file_partition: &Partition,
) -> WeightedGraph {
    let cluster_of = |m: usize| file_partition.label_of(model.methods[m].file_id);
    WeightedGraph::new(
        g.n,
        g.edges
            .iter()
            .filter(|&&(i, j, _)| cluster_of(i) == cluster_of(j))
            .copied()
            .collect::<Vec<_>>(),
    )
}

/// Groups methods by file cluster and assigns global method-cluster
/// IDs in (file cluster, local label) order. `method_partition = None`
/// means each file cluster's methods form one cluster (`file_only`).
fn assemble_hierarchy(
    model: &RepoModel,
    file_partition: Partition,
    method_partition: Option<Partition>,
    n_methods: usize,
) -> Hierarchy {
    let k_files = file_partition.n_communities();
    let mut groups = Vec::with_capacity(k_files);
    let mut method_cluster_of = vec![0usize; n_methods];
    let mut next_global = 0;

    for fc in 0..k_files {
        let method_ids: Vec<usize> = (0..n_methods)
            .filter(|&m| file_partition.label_of(model.methods[m].file_id) == fc)
            .collect();
        let local = match &method_partition {
            Some(global) => Partition::from_labels(
                &method_ids.iter().map(|&m| global.label_of(m)).collect::<Vec<_>>(),
            ),
            None => Partition::all_in_one(method_ids.len()),
        };
        let global_cluster_ids: Vec<usize> =
            (0..local.n_communities()).map(|l| next_global + l).collect();
        next_global += local.n_communities();
        for (pos, &m) in method_ids.iter().enumerate() {
            method_cluster_of[m] = global_cluster_ids[local.label_of(pos)];
        }
        groups.push(FileClusterMethods {
            file_cluster: fc,
            method_ids,
            partition: local,
            global_cluster_ids,
        });
    }

    Hierarchy {
        file_partition,
        method_partitions: groups,
        method_cluster_of,
        n_method_clusters: next_global,
    }
}

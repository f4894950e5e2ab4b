//! Independent oracles shared by the integration tests.
//!
//! Everything here recomputes results from first principles — exhaustive
//! partition enumeration, dense quality sums, pair-counting agreement,
//! set-algebra coverage — deliberately sharing no code with the library
//! beyond its public input types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ── random graphs ───────────────────────────────────────────────────

/// Random undirected weighted graph: each pair gets an edge with
/// probability `p`, weight uniform in (0, 1].
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j, rng.gen_range(0.05..=1.0)));
            }
        }
    }
    edges
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ── partition enumeration ───────────────────────────────────────────

/// Every set partition of `0..n` as a canonical label vector
/// (restricted growth strings: label 0 first, each new label is the
/// smallest unused). Bell(8) = 4140, so exhaustive search stays cheap.
pub fn all_label_vectors(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn recurse(labels: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == labels.len() {
            out.push(labels.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            labels[pos] = label;
            recurse(labels, pos + 1, max_used.max(label), out);
        }
    }
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    labels[0] = 0;
    recurse(&mut labels, 1, 0, &mut out);
    out
}

// ── CPM quality, from scratch ───────────────────────────────────────

/// Dense CPM objective: Σ_c (within-weight(c) − γ·C(n_c, 2)).
pub fn cpm_oracle(edges: &[(usize, usize, f64)], labels: &[usize], gamma: f64) -> f64 {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut within = vec![0.0f64; classes];
    let mut sizes = vec![0.0f64; classes];
    for &l in labels {
        sizes[l] += 1.0;
    }
    for &(i, j, w) in edges {
        if labels[i] == labels[j] {
            within[labels[i]] += w;
        }
    }
    (0..classes)
        .map(|c| within[c] - gamma * sizes[c] * (sizes[c] - 1.0) / 2.0)
        .sum()
}

/// The exhaustive CPM optimum over all partitions of the node set.
pub fn cpm_optimum(n: usize, edges: &[(usize, usize, f64)], gamma: f64) -> f64 {
    all_label_vectors(n)
        .iter()
        .map(|labels| cpm_oracle(edges, labels, gamma))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True when every label class induces a connected subgraph.
pub fn communities_connected(n: usize, edges: &[(usize, usize, f64)], labels: &[usize]) -> bool {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, _) in edges {
        if labels[i] == labels[j] {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    for class in classes {
        let members: Vec<usize> = (0..n).filter(|&v| labels[v] == class).collect();
        let mut seen = BTreeSet::from([members[0]]);
        let mut stack = vec![members[0]];
        while let Some(v) = stack.pop() {
            for &u in &adjacency[v] {
                if seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        if seen.len() != members.len() {
            return false;
        }
    }
    true
}

// ── pair-counting ARI ───────────────────────────────────────────────

/// ARI by direct pair counting over all C(n, 2) node pairs.
pub fn ari_pair_oracle(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut n11, mut n00, mut n10, mut n01) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let same_a = a[i] == a[j];
            let same_b = b[i] == b[j];
            match (same_a, same_b) {
                (true, true) => n11 += 1.0,
                (false, false) => n00 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
            }
        }
    }
    let total = n11 + n00 + n10 + n01;
    if total == 0.0 {
        return 1.0;
    }
    let index = n11;
    let expected = (n11 + n10) * (n11 + n01) / total;
    let max_index = ((n11 + n10) + (n11 + n01)) / 2.0;
    if (max_index - expected).abs() < 1e-15 {
        // Degenerate margins: identical partitions agree perfectly.
        return if n10 + n01 == 0.0 { 1.0 } else { 0.0 };
    }
    (index - expected) / (max_index - expected)
}

// ── embeddings, reimplemented ───────────────────────────────────────

/// Independent re-derivation of the hashing embedder: lowercase
/// ASCII-alphanumeric runs, unigram + adjacent-bigram FNV-1a buckets,
/// L2 normalization.
pub fn oracle_embed(text: &str, dim: usize) -> Option<Vec<f64>> {
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            current.push(c.to_ascii_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    if tokens.is_empty() {
        return None;
    }
    let mut counts = vec![0.0f64; dim];
    let mut add = |s: &str| {
        let mut hash: u64 = 14695981039346656037;
        for &b in s.as_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(1099511628211);
        }
        counts[(hash % dim as u64) as usize] += 1.0;
    };
    for t in &tokens {
        add(t);
    }
    for pair in tokens.windows(2) {
        add(&format!("{} {}", pair[0], pair[1]));
    }
    let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some(counts.into_iter().map(|x| x / norm).collect())
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

// ── rank statistics, reimplemented ──────────────────────────────────

/// Midranks: r_i = |{j : x_j < x_i}| + (|{j : x_j = x_i}| + 1) / 2.
pub fn oracle_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&x| {
            let less = values.iter().filter(|&&y| y < x).count() as f64;
            let equal = values.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation of midranks; `None` when either side has zero
/// rank variance.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let rx = oracle_ranks(x);
    let ry = oracle_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Cohen's kappa straight from the 2×2 contingency table.
pub fn oracle_kappa(a: &[bool], b: &[bool]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    if p_o == 1.0 {
        return 1.0;
    }
    let a_yes = a.iter().filter(|&&v| v).count() as f64 / n;
    let b_yes = b.iter().filter(|&&v| v).count() as f64 / n;
    let p_e = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
    if p_e == 1.0 {
        return 0.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

// ── coverage / trace / link oracles ─────────────────────────────────

use reposum_core::eval::{
    CoverageAssessment, CoverageJudgment, Judge, JudgeError, JudgeVote, RelevanceAssessment,
    RelevanceJudgment,
};

/// Brute-force (C, CB, CC) by explicit set algebra over judgment
/// lists; `None` when an exclusion empties a denominator.
pub fn coverage_oracle(
    relevance: &[RelevanceJudgment],
    coverage: &[CoverageJudgment],
    n_manual: usize,
    n_generated: usize,
) -> Option<(f64, f64, f64)> {
    let mut gt_excluded: BTreeSet<&str> = BTreeSet::new();
    let mut gt_relevant: BTreeSet<&str> = BTreeSet::new();
    let mut gt_covered: BTreeSet<&str> = BTreeSet::new();
    for j in relevance {
        if !j.available {
            gt_excluded.insert(&j.gt_id);
        } else if j.final_relevant {
            gt_relevant.insert(&j.gt_id);
        }
    }
    for j in coverage {
        if !j.available {
            gt_excluded.insert(&j.gt_id);
        } else if j.final_cc {
            gt_covered.insert(&j.gt_id);
        }
    }
    let manual_denominator = n_manual.checked_sub(gt_excluded.len())?;
    if manual_denominator == 0 {
        return None;
    }

    let mut gen_relevant: BTreeSet<usize> = BTreeSet::new();
    let mut gen_failed: BTreeSet<usize> = BTreeSet::new();
    for j in relevance {
        if !j.available {
            gen_failed.insert(j.candidate_feature_id);
        } else if j.final_relevant {
            gen_relevant.insert(j.candidate_feature_id);
        }
    }
    let gen_excluded = gen_failed.difference(&gen_relevant).count();
    let generated_denominator = n_generated.checked_sub(gen_excluded)?;
    if generated_denominator == 0 {
        return None;
    }

    let surviving = |set: &BTreeSet<&str>| {
        set.iter().filter(|id| !gt_excluded.contains(*id)).count() as f64
    };
    Some((
        surviving(&gt_relevant) / manual_denominator as f64,
        gen_relevant.len() as f64 / generated_denominator as f64,
        surviving(&gt_covered) / manual_denominator as f64,
    ))
}

/// Brute-force trace precision and recall over deduplicated link
/// sets. With `any_manual`, correctness ignores the relevance map.
pub fn trace_oracle(
    generated: &[(usize, String)],
    manual: &[(String, String)],
    relevance: &BTreeSet<(usize, String)>,
    any_manual: bool,
) -> (f64, f64) {
    let gen_set: BTreeSet<&(usize, String)> = generated.iter().collect();
    let man_set: BTreeSet<&(String, String)> = manual.iter().collect();

    let correct = gen_set
        .iter()
        .filter(|(fid, file)| {
            if any_manual {
                man_set.iter().any(|(_, f)| f == file)
            } else {
                relevance.iter().any(|(rf, gt)| {
                    rf == fid && man_set.contains(&(gt.clone(), file.clone()))
                })
            }
        })
        .count();
    let covered = man_set
        .iter()
        .filter(|(gt, file)| {
            if any_manual {
                gen_set.iter().any(|(_, f)| f == file)
            } else {
                relevance.iter().any(|(fid, rg)| {
                    rg == gt && gen_set.contains(&(*fid, file.clone()))
                })
            }
        })
        .count();
    (
        correct as f64 / gen_set.len() as f64,
        covered as f64 / man_set.len() as f64,
    )
}

/// Brute-force macro-averaged link precision and recall: rank features
/// by cosine (descending, ascending-ID ties), union the top-k method
/// sets, score against the changed set.
pub fn linkk_oracle(
    changed: &[BTreeSet<usize>],
    embeddings: &[Vec<f64>],
    features: &[(usize, Vec<f64>)],
    methods_of: &BTreeMap<usize, BTreeSet<usize>>,
    k: usize,
) -> (f64, f64) {
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for (changed_set, embedding) in changed.iter().zip(embeddings) {
        let mut scored: Vec<(usize, f64)> = features
            .iter()
            .map(|(fid, fe)| (*fid, oracle_cosine(embedding, fe)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        let predicted: BTreeSet<usize> = scored
            .iter()
            .flat_map(|(fid, _)| methods_of[fid].iter().copied())
            .collect();
        let hits = predicted.intersection(changed_set).count() as f64;
        precision_sum += if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
        recall_sum += hits / changed_set.len() as f64;
    }
    let n = changed.len() as f64;
    (precision_sum / n, recall_sum / n)
}

// ── synthetic repositories ──────────────────────────────────────────

use reposum_core::repo_graph::{FileNode, MethodNode, RepoModel};
use reposum_core::summarize::{MatrixLevel, SimilarityMatrix};

/// Random well-formed repository model: 2–5 files with 1–4 methods
/// each, sparse random imports and calls.
pub fn synthetic_model(rng: &mut ChaCha8Rng) -> RepoModel {
    let n_files = rng.gen_range(2..=5);
    let mut files = Vec::new();
    let mut methods = Vec::new();
    for f in 0..n_files {
        files.push(FileNode {
            file_id: f,
            path: format!("p{f}/C{f}.java"),
            package: format!("p{f}"),
        });
        for i in 0..rng.gen_range(1..=4) {
            let id = methods.len();
            methods.push(MethodNode {
                method_id: id,
                fqn: format!("p{f}.C{f}.m{i}"),
                file_id: f,
                span: (1, 2),
                source_text: "void m() {}".into(),
            });
        }
    }
    let mut imports = BTreeSet::new();
    for a in 0..n_files {
        for b in 0..n_files {
            if a != b && rng.gen_bool(0.3) {
                imports.insert((a, b));
            }
        }
    }
    let mut calls = BTreeSet::new();
    for a in 0..methods.len() {
        for b in 0..methods.len() {
            if a != b && rng.gen_bool(0.15) {
                calls.insert((a, b));
            }
        }
    }
    let model = RepoModel { repo_root: "synthetic".into(), files, methods, imports, calls };
    model.validate().unwrap();
    model
}

/// Random symmetric similarity matrix with entries in [0, 1).
pub fn random_similarity(rng: &mut ChaCha8Rng, n: usize, level: MatrixLevel) -> SimilarityMatrix {
    SimilarityMatrix::from_fn(n, level, |_, _| rng.gen_range(0.0..1.0))
}

// ── scripted judge ──────────────────────────────────────────────────

/// Judge whose verdicts are driven by markers in the judged texts:
/// `agreeyes` candidates get a yes from both primaries, `split`
/// candidates get `split_vote` (so two judges constructed with
/// opposite values disagree and force the tiebreaker), and
/// `breakdown` candidates make the `split_vote = true` judge fail
/// when the ground truth carries `outage`. Coverage behaves the same
/// way through `covyes` / `covsplit` markers on the ground-truth text.
pub struct ScriptedJudge {
    pub label: String,
    pub split_vote: bool,
}

impl Judge for ScriptedJudge {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn assess_relevance(
        &self,
        gt_text: &str,
        candidate_text: &str,
    ) -> Result<RelevanceAssessment, JudgeError> {
        if gt_text.contains("outage") && candidate_text.contains("breakdown") && self.split_vote {
            return Err(JudgeError::Unavailable(format!("{} scripted to fail", self.label)));
        }
        let relevant = if candidate_text.contains("split") {
            self.split_vote
        } else {
            candidate_text.contains("agreeyes")
        };
        Ok(RelevanceAssessment {
            gt_entities: BTreeSet::from(["shared".to_string()]),
            gt_operations: BTreeSet::from(["manage".to_string()]),
            cand_entities: BTreeSet::from(["shared".to_string()]),
            cand_operations: BTreeSet::from(["manage".to_string()]),
            relevant,
            rationale: format!("scripted verdict by {}", self.label),
        })
    }

    fn assess_coverage(
        &self,
        gt_text: &str,
        _related_texts: &[String],
    ) -> Result<CoverageAssessment, JudgeError> {
        if gt_text.contains("covfail") && self.split_vote {
            return Err(JudgeError::Unavailable(format!("{} scripted to fail", self.label)));
        }
        let covered = if gt_text.contains("covsplit") {
            self.split_vote
        } else {
            gt_text.contains("covyes")
        };
        Ok(CoverageAssessment { covered, rationale: format!("scripted verdict by {}", self.label) })
    }

    fn tiebreak_relevance(
        &self,
        _gt_text: &str,
        _candidate_text: &str,
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        assert_eq!(votes.len(), 2, "tiebreaker must see exactly the two primary votes");
        Ok((true, format!("scripted tiebreak by {}", self.label)))
    }

    fn tiebreak_coverage(
        &self,
        _gt_text: &str,
        _related_texts: &[String],
        votes: &[JudgeVote],
    ) -> Result<(bool, String), JudgeError> {
        assert_eq!(votes.len(), 2, "tiebreaker must see exactly the two primary votes");
        Ok((true, format!("scripted tiebreak by {}", self.label)))
    }
}

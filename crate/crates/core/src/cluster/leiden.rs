//! Leiden community detection under the CPM objective.
//!
//! The classic three phases run per level: seeded local moving from the
//! current partition, greedy refinement inside each community, then
//! aggregation of refined communities into super-nodes (carrying node
//! sizes so the CPM penalty stays exact). Levels repeat until nothing
//! shrinks.
//!
//! A seeded fix loop then polishes the flat projection on the original
//! graph — single-node moves to a fixpoint, splitting any internally
//! disconnected community into its components, and greedy pairwise
//! community merges — until a full cycle changes nothing. On small
//! graphs a Kernighan–Lin-style escape pass follows: one tentative
//! non-improving move plus greedy recovery, kept only when the chain
//! strictly raises quality. Every accepted step strictly increases
//! `Q_γ`, so the loop terminates, and at exit the advertised
//! postconditions hold by construction: every community induces a
//! connected subgraph, and no single-node move can improve quality.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cpm_quality, Partition, WeightedGraph, EPS};

/// One aggregation level: adjacency without self-loops, per-node sizes
/// (number of original nodes), and original-node membership.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    size: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Level {
    fn n(&self) -> usize {
        self.size.len()
    }
}

/// Partitions `g` under CPM resolution `gamma`, deterministically for a
/// fixed `(g, gamma, seed)`.
pub fn leiden(g: &WeightedGraph, gamma: f64, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level {
        adj: g.adjacency(),
        size: vec![1.0; g.n],
        members: (0..g.n).map(|i| vec![i]).collect(),
    };
    let mut labels: Vec<usize> = (0..g.n).collect();
    let mut last_q = f64::NEG_INFINITY;

    loop {
        let mut order: Vec<usize> = (0..level.n()).collect();
        order.shuffle(&mut rng);
        local_move(&level.adj, &level.size, &mut labels, gamma, &order);

        // Quality on the original graph must be monotone across levels.
        if cfg!(debug_assertions) {
            let flat = project(&level, &labels, g.n);
            let q = cpm_quality(g, &Partition::from_labels(&flat), gamma);
            debug_assert!(
                q >= last_q - 1e-9,
                "quality regressed across levels: {last_q} -> {q}"
            );
            last_q = q;
        }

        let k = count_distinct(&labels);
        if k == level.n() {
            // Every community is a single node; aggregating is identity.
            break;
        }

        let refined = refine(&level, &labels, gamma, &mut rng);
        if count_distinct(&refined) == level.n() {
            // Refinement kept all singletons; no progress possible.
            break;
        }
        let (next, next_labels) = aggregate(&level, &refined, &labels);
        level = next;
        labels = next_labels;
    }

    let mut flat = project(&level, &labels, g.n);
    fix_loop(g, &mut flat, gamma, &mut rng);
    Partition::from_labels(&flat)
}

fn count_distinct(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Flattens level labels onto original node IDs.
fn project(level: &Level, labels: &[usize], n_original: usize) -> Vec<usize> {
    let mut flat = vec![0; n_original];
    for (node, members) in level.members.iter().enumerate() {
        for &orig in members {
            flat[orig] = labels[node];
        }
    }
    flat
}

/// Queue-driven local moving. Each accepted move strictly improves
/// `Q_γ`; the queue drains when no node can improve, so the result is a
/// single-move fixpoint with respect to current communities plus the
/// empty community. Returns whether anything moved.
fn local_move(
    adj: &[Vec<(usize, f64)>],
    size: &[f64],
    labels: &mut [usize],
    gamma: f64,
    order: &[usize],
) -> bool {
    let n = labels.len();
    // Labels stay within 0..n; track community sizes and free labels.
    let mut csize = vec![0.0; n];
    for (v, &l) in labels.iter().enumerate() {
        csize[l] += size[v];
    }
    let mut free: Vec<usize> = (0..n).rev().filter(|&l| csize[l] == 0.0).collect();

    let mut queue: VecDeque<usize> = order.iter().copied().collect();
    let mut queued = vec![true; n];
    let mut moved_any = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let com = labels[v];
        let sv = size[v];

        let mut neighbor_weight: BTreeMap<usize, f64> = BTreeMap::new();
        for &(u, w) in &adj[v] {
            *neighbor_weight.entry(labels[u]).or_insert(0.0) += w;
        }
        let w_own = neighbor_weight.get(&com).copied().unwrap_or(0.0);
        let removal_cost = w_own - gamma * sv * (csize[com] - sv);

        let mut best_label = com;
        let mut best_delta = 0.0;
        for (&target, &w) in &neighbor_weight {
            if target == com {
                continue;
            }
            let delta = (w - gamma * sv * csize[target]) - removal_cost;
            if delta > best_delta + EPS {
                best_delta = delta;
                best_label = target;
            }
        }
        // Leaving for a fresh empty community can pay when the current
        // community holds v back (delta = −removal_cost).
        if csize[com] > sv && -removal_cost > best_delta + EPS {
            if let Some(fresh) = free.last().copied() {
                best_label = fresh;
            }
        }

        if best_label != com {
            if csize[best_label] == 0.0 {
                free.retain(|&l| l != best_label);
            }
            labels[v] = best_label;
            csize[com] -= sv;
            csize[best_label] += sv;
            if csize[com] == 0.0 {
                free.push(com);
            }
            moved_any = true;
            for &(u, _) in &adj[v] {
                if labels[u] != best_label && !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    moved_any
}

/// Refinement: inside each community of `coarse`, greedily merge
/// still-singleton nodes into the best positively-connected refined
/// sub-community. Positive merge gain requires positive connecting
/// weight, so refined communities are connected by induction.
fn refine(level: &Level, coarse: &[usize], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = level.n();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut rsize: Vec<f64> = level.size.clone();

    let mut by_community: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &c) in coarse.iter().enumerate() {
        by_community.entry(c).or_default().push(v);
    }

    for (&community, nodes) in &by_community {
        if nodes.len() < 2 {
            continue;
        }
        let total: f64 = nodes.iter().map(|&v| level.size[v]).sum();
        let mut order = nodes.clone();
        order.shuffle(rng);
        for &v in &order {
            // Only nodes still alone in their refined community move;
            // this keeps refinement a partition of each community.
            if rsize[refined[v]] != level.size[v] || refined[v] != v {
                continue;
            }
            let sv = level.size[v];
            // Well-connectedness of v within its community.
            let w_to_rest: f64 = level.adj[v]
                .iter()
                .filter(|&&(u, _)| coarse[u] == community)
                .map(|&(_, w)| w)
                .sum();
            if w_to_rest < gamma * sv * (total - sv) - EPS {
                continue;
            }
            let mut weight_to: BTreeMap<usize, f64> = BTreeMap::new();
            for &(u, w) in &level.adj[v] {
                if coarse[u] == community && refined[u] != v {
                    *weight_to.entry(refined[u]).or_insert(0.0) += w;
                }
            }
            let mut best = None;
            let mut best_delta = EPS;
            for (&target, &w) in &weight_to {
                let delta = w - gamma * sv * rsize[target];
                if delta > best_delta {
                    best_delta = delta;
                    best = Some(target);
                }
            }
            if let Some(target) = best {
                rsize[target] += sv;
                rsize[v] = 0.0;
                refined[v] = target;
            }
        }
    }
    refined
}

/// Collapses refined communities into super-nodes. The next level's
/// starting labels are the coarse communities, per the Leiden design.
fn aggregate(level: &Level, refined: &[usize], coarse: &[usize]) -> (Level, Vec<usize>) {
    let mut id_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in refined {
        let next = id_of.len();
        id_of.entry(r).or_insert(next);
    }
    let n_super = id_of.len();

    let mut size = vec![0.0; n_super];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_super];
    let mut start_label = vec![0; n_super];
    for (v, &r) in refined.iter().enumerate() {
        let s = id_of[&r];
        size[s] += level.size[v];
        members[s].extend_from_slice(&level.members[v]);
        start_label[s] = coarse[v];
    }
    // Dense-relabel so community labels stay within 0..n_super for the
    // next local-moving pass.
    canonicalize(&mut start_label);

    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (v, list) in level.adj.iter().enumerate() {
        for &(u, w) in list {
            if v < u {
                let (a, b) = (id_of[&refined[v]], id_of[&refined[u]]);
                if a != b {
                    *weights.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
                }
            }
        }
    }
    let mut adj = vec![Vec::new(); n_super];
    for (&(a, b), &w) in &weights {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    for list in &mut adj {
        list.sort_by_key(|&(v, _)| v);
    }

    (Level { adj, size, members }, start_label)
}

/// Node-count ceiling for the escape pass: each candidate move costs a
/// whole-graph re-polish, which stops paying for itself on graphs
/// bigger than this. Below it, local optima that survive single moves,
/// splits, and merges are reliably dislodged.
const ESCAPE_MAX_NODES: usize = 32;

/// Final polish on the original graph. Alternates single-node moves to
/// a fixpoint, component splitting, and greedy community merges until a
/// full cycle changes nothing, then (on small graphs) tries the
/// variable-depth escape. Splitting a disconnected community into
/// components gains exactly `γ·n_a·n_b` per separated pair (no cross
/// weight by definition), so every accepted step raises quality. The
/// sweep order is reshuffled per cycle so that restarts with different
/// seeds probe different move sequences instead of sharing one
/// attractor.
fn fix_loop(g: &WeightedGraph, labels: &mut Vec<usize>, gamma: f64, rng: &mut ChaCha8Rng) {
    let adj = g.adjacency();
    let size = vec![1.0; g.n];
    let mut order: Vec<usize> = (0..g.n).collect();
    loop {
        // Splits and merges leave label gaps; local_move needs labels
        // dense within 0..n.
        canonicalize(labels);
        order.shuffle(rng);
        if greedy_cycle(g, &adj, &size, labels, gamma, &order) {
            continue;
        }
        if g.n <= ESCAPE_MAX_NODES && escape_pass(g, &adj, &size, labels, gamma, rng) {
            continue;
        }
        break;
    }
}

/// One round of the cheap improvement steps. Returns whether anything
/// changed.
fn greedy_cycle(
    g: &WeightedGraph,
    adj: &[Vec<(usize, f64)>],
    size: &[f64],
    labels: &mut [usize],
    gamma: f64,
    order: &[usize],
) -> bool {
    let mut changed = false;
    changed |= local_move(adj, size, labels, gamma, order);
    changed |= split_disconnected(adj, labels);
    changed |= greedy_merges(g, labels, gamma);
    changed
}

/// Kernighan–Lin-style escape from local optima the cheap steps cannot
/// leave. A pairing can lock in because it is locally heaviest even
/// though a globally better matching assigns both endpoints elsewhere;
/// no quality-monotone step sequence undoes it. Each candidate here
/// applies one tentative single-node move regardless of its own delta,
/// re-runs the greedy cycle to a fixpoint, and keeps the chain iff net
/// quality strictly improved. Only communities adjacent to the moved
/// node (plus a fresh singleton) are tried — a non-adjacent target
/// would be disconnected and immediately split apart again.
fn escape_pass(
    g: &WeightedGraph,
    adj: &[Vec<(usize, f64)>],
    size: &[f64],
    labels: &mut Vec<usize>,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> bool {
    let n = labels.len();
    let q0 = cpm_quality(g, &Partition::from_labels(labels), gamma);
    let fresh = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let mut order: Vec<usize> = (0..n).collect();

    for &v in &nodes {
        let com = labels[v];
        let com_is_singleton = labels.iter().filter(|&&l| l == com).count() == 1;
        let mut targets: Vec<usize> = adj[v].iter().map(|&(u, _)| labels[u]).collect();
        targets.push(fresh);
        targets.sort_unstable();
        targets.dedup();
        for &target in &targets {
            if target == com || (target == fresh && com_is_singleton) {
                continue;
            }
            let mut trial = labels.clone();
            trial[v] = target;
            loop {
                canonicalize(&mut trial);
                order.shuffle(rng);
                if !greedy_cycle(g, adj, size, &mut trial, gamma, &order) {
                    break;
                }
            }
            if cpm_quality(g, &Partition::from_labels(&trial), gamma) > q0 + EPS {
                *labels = trial;
                return true;
            }
        }
    }
    false
}

/// Remaps labels to dense `0..k` by first occurrence.
fn canonicalize(labels: &mut [usize]) {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels.iter_mut() {
        let next = remap.len();
        *l = *remap.entry(*l).or_insert(next);
    }
}

/// Splits every community that is not internally connected (via weight
/// > 0 edges) into its connected components.
fn split_disconnected(adj: &[Vec<(usize, f64)>], labels: &mut [usize]) -> bool {
    let n = labels.len();
    let mut next_label = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut component = vec![usize::MAX; n];
    let mut changed = false;

    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(v);
    }
    for (&label, nodes) in &by_label {
        let mut first = true;
        for &start in nodes {
            if component[start] != usize::MAX {
                continue;
            }
            let this_label = if first {
                first = false;
                label
            } else {
                changed = true;
                next_label += 1;
                next_label - 1
            };
            let mut stack = vec![start];
            component[start] = this_label;
            while let Some(v) = stack.pop() {
                for &(u, w) in &adj[v] {
                    if w > 0.0 && labels[u] == label && component[u] == usize::MAX {
                        component[u] = this_label;
                        stack.push(u);
                    }
                }
            }
        }
    }
    labels.copy_from_slice(&component);
    changed
}

/// Repeatedly merges the community pair with the largest positive CPM
/// merge delta. Ties break toward the lexicographically smallest pair.
fn greedy_merges(g: &WeightedGraph, labels: &mut [usize], gamma: f64) -> bool {
    let mut cross: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut csize: BTreeMap<usize, f64> = BTreeMap::new();
    for &l in labels.iter() {
        *csize.entry(l).or_insert(0.0) += 1.0;
    }
    for &(i, j, w) in &g.edges {
        let (a, b) = (labels[i], labels[j]);
        if a != b {
            *cross.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
    }

    let mut merged_any = false;
    loop {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&pair, &w) in &cross {
            let delta = w - gamma * csize[&pair.0] * csize[&pair.1];
            if delta > EPS && best.map_or(true, |(_, d)| delta > d + EPS) {
                best = Some((pair, delta));
            }
        }
        let Some(((keep, gone), _)) = best else {
            break;
        };
        merged_any = true;
        for l in labels.iter_mut() {
            if *l == gone {
                *l = keep;
            }
        }
        let gone_size = csize.remove(&gone).unwrap_or(0.0);
        *csize.entry(keep).or_insert(0.0) += gone_size;
        // Re-route `gone`'s cross weights onto `keep`.
        let moved: Vec<((usize, usize), f64)> = cross
            .iter()
            .filter(|&(&(a, b), _)| a == gone || b == gone)
            .map(|(&p, &w)| (p, w))
            .collect();
        for (pair, w) in moved {
            cross.remove(&pair);
            let other = if pair.0 == gone { pair.1 } else { pair.0 };
            if other != keep {
                *cross.entry((other.min(keep), other.max(keep))).or_insert(0.0) += w;
            }
        }
    }
    merged_any
}

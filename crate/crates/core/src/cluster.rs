//! Confidence-ordered cluster expansion with overlap voting.
//!
//! Connected components over synonym edges let meaning drift down chains:
//! `a—b—c—d` collapses into one cluster even when `a` and `d` share
//! nothing. Expansion resists that by admitting a term into a cluster only
//! when its verified synonyms cover more than a threshold fraction of the
//! cluster's current members, so membership always reflects agreement with
//! the whole cluster, not with one bridge term.
//!
//! Edges are processed strongest-first. An edge between two unassigned
//! terms seeds a new cluster; otherwise each endpoint is tested against the
//! clusters its partner belonged to before the edge was processed, and may
//! join several of them — polysemous terms legitimately sit in more than
//! one cluster during this phase. A reduction pass then makes membership
//! hard again: each multi-member votes for the cluster containing most of
//! its direct synonyms, clusters left with fewer than two members dissolve,
//! and survivors are renumbered densely in creation order.

use std::cmp::Reverse;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::types::{TermId, VerifiedEdge};

#[derive(Debug, Clone, Copy)]
pub struct ClusterConfig {
    /// A term joins a cluster when `|synonyms ∩ members| / |members|`
    /// exceeds this.
    pub intersection_ratio_threshold: f64,
    /// When set, the ratio comparison is `>=` instead of the default `>`.
    pub inclusive_ratio: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            intersection_ratio_threshold: 0.51,
            inclusive_ratio: false,
        }
    }
}

/// Undirected synonym adjacency with sorted neighbor lists.
#[derive(Debug, Clone, Default)]
pub struct AdjacencyMap {
    neighbors: HashMap<TermId, Vec<TermId>>,
}

impl AdjacencyMap {
    pub fn from_edges(edges: &[VerifiedEdge]) -> Self {
        let mut neighbors: HashMap<TermId, Vec<TermId>> = HashMap::new();
        for e in edges {
            debug_assert!(e.a < e.b, "edges are canonical by construction");
            neighbors.entry(e.a).or_default().push(e.b);
            neighbors.entry(e.b).or_default().push(e.a);
        }
        for list in neighbors.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        AdjacencyMap { neighbors }
    }

    /// Verified synonyms of `t`, ascending. Never contains `t` itself.
    pub fn neighbors(&self, t: TermId) -> &[TermId] {
        self.neighbors.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `|neighbors(t) ∩ members|` for a sorted member list.
    pub fn overlap(&self, t: TermId, members: &[TermId]) -> usize {
        sorted_intersection_len(self.neighbors(t), members)
    }
}

fn sorted_intersection_len(a: &[TermId], b: &[TermId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Soft clustering produced by [`expand`]: clusters in creation order, and
/// every term's cluster list (a term may appear in several).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftClusterState {
    /// Member lists, sorted ascending, indexed by creation-order cluster id.
    pub clusters: Vec<Vec<TermId>>,
    /// Ascending cluster ids per assigned term. Serialized as a sorted map
    /// so dumps are byte-stable.
    pub assignments: std::collections::BTreeMap<TermId, Vec<u32>>,
}

impl SoftClusterState {
    /// Terms that belong to more than one cluster.
    pub fn multi_members(&self) -> Vec<TermId> {
        self.assignments
            .iter()
            .filter(|(_, cs)| cs.len() > 1)
            .map(|(&t, _)| t)
            .collect()
    }
}

fn ratio_passes(ratio: f64, config: &ClusterConfig) -> bool {
    if config.inclusive_ratio {
        ratio >= config.intersection_ratio_threshold
    } else {
        ratio > config.intersection_ratio_threshold
    }
}

fn sorted_insert(list: &mut Vec<TermId>, value: TermId) {
    if let Err(pos) = list.binary_search(&value) {
        list.insert(pos, value);
    }
}

/// Expands edges into soft clusters, strongest edge first (ties broken by
/// the pair, ascending, so the result is a pure function of the edge set).
pub fn expand(edges: &[VerifiedEdge], config: &ClusterConfig) -> SoftClusterState {
    let adjacency = AdjacencyMap::from_edges(edges);
    let mut ordered: Vec<&VerifiedEdge> = edges.iter().collect();
    ordered.sort_by(|x, y| {
        y.confidence
            .total_cmp(&x.confidence)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });

    let mut clusters: Vec<Vec<TermId>> = Vec::new();
    let mut assignments: HashMap<TermId, Vec<u32>> = HashMap::new();

    for edge in ordered {
        let snap_a = assignments.get(&edge.a).cloned().unwrap_or_default();
        let snap_b = assignments.get(&edge.b).cloned().unwrap_or_default();

        if snap_a.is_empty() && snap_b.is_empty() {
            let id = clusters.len() as u32;
            clusters.push(vec![edge.a.min(edge.b), edge.a.max(edge.b)]);
            assignments.entry(edge.a).or_default().push(id);
            assignments.entry(edge.b).or_default().push(id);
            continue;
        }

        // Each endpoint is tested against the clusters its partner was in
        // before this edge, lowest cluster id first. Members are read live,
        // so the second endpoint sees what the first endpoint just joined
        // — but only within clusters that existed in the snapshot.
        for (term, partner_clusters) in [(edge.a, &snap_b), (edge.b, &snap_a)] {
            for &cid in partner_clusters.iter() {
                let members = &clusters[cid as usize];
                if members.binary_search(&term).is_ok() {
                    continue;
                }
                let ratio = adjacency.overlap(term, members) as f64 / members.len() as f64;
                if ratio_passes(ratio, config) {
                    sorted_insert(&mut clusters[cid as usize], term);
                    let list = assignments.entry(term).or_default();
                    if let Err(pos) = list.binary_search(&cid) {
                        list.insert(pos, cid);
                    }
                }
            }
        }
    }

    SoftClusterState {
        clusters,
        assignments: assignments.into_iter().collect(),
    }
}

/// Picks the cluster a multi-member keeps: most direct synonyms among the
/// cluster's members, ties to the smaller cluster, then to the lower
/// cluster id. Member sets are the pre-vote snapshot, so vote order cannot
/// influence outcomes. Returns `None` when the term is in no cluster.
pub fn vote(
    t: TermId,
    cluster_ids: &[u32],
    snapshot: &[Vec<TermId>],
    adjacency: &AdjacencyMap,
) -> Option<u32> {
    cluster_ids.iter().copied().min_by_key(|&cid| {
        let members = &snapshot[cid as usize];
        (
            Reverse(adjacency.overlap(t, members)),
            members.len(),
            cid,
        )
    })
}

/// Reduces soft clusters to disjoint ones: every multi-member keeps only
/// the cluster it votes for, clusters with fewer than two remaining members
/// dissolve (their members end up unclustered), and survivors are returned
/// in creation order with dense ids implied by position.
pub fn reduce(state: &SoftClusterState, adjacency: &AdjacencyMap) -> Vec<Vec<TermId>> {
    let snapshot = state.clusters.clone();
    let mut clusters = state.clusters.clone();

    // Voting reads only the snapshot; removals are applied afterwards so
    // no vote can observe another vote's effect.
    let mut removals: Vec<(TermId, u32)> = Vec::new();
    for (&t, cluster_ids) in &state.assignments {
        if cluster_ids.len() < 2 {
            continue;
        }
        let keep = vote(t, cluster_ids, &snapshot, adjacency)
            .expect("multi-member has at least two clusters");
        for &cid in cluster_ids {
            if cid != keep {
                removals.push((t, cid));
            }
        }
    }
    for (t, cid) in removals {
        if let Ok(pos) = clusters[cid as usize].binary_search(&t) {
            clusters[cid as usize].remove(pos);
        }
    }

    clusters.retain(|members| members.len() >= 2);
    clusters
}

/// Full soft-then-hard pipeline over one edge set.
pub fn cluster_terms(edges: &[VerifiedEdge], config: &ClusterConfig) -> Vec<Vec<TermId>> {
    let state = expand(edges, config);
    let adjacency = AdjacencyMap::from_edges(edges);
    reduce(&state, &adjacency)
}

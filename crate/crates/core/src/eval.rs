//! Synthetic evaluation harness.
//!
//! Builds labeled edge sets from a declarative spec — dense concept
//! groups, weak chain links between them, and polysemous terms wired into
//! several groups — then measures how much cross-group contamination the
//! clustering lets through, next to a connected-components baseline over
//! the same edges.
//!
//! Topology is a pure function of the declared shape: each group contributes the
//! first `ceil(density * C(n, 2))` of its member pairs in canonical order,
//! polysemous terms attach to the first `count` members of each wired
//! group, and chain links join the named terms. The seed feeds only the
//! confidence draws, in fixed edge order, so two runs differing in seed
//! share the exact same graph shape.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_terms, ClusterConfig};
use crate::error::{Error, Result};
use crate::types::{TermId, TermTable, VerifiedEdge};

/// Confidence range for edges inside a group.
const STRONG_CONFIDENCE: std::ops::Range<f64> = 0.85..0.99;
/// Confidence range for chain links and polysemy wiring. Keeping every
/// cross-group attachment below the intra-group band means groups fully
/// crystallize before any ambiguous term is tested against them, so
/// attachment outcomes depend on the declared wiring counts rather than on
/// the interleaving of edge confidences.
const BRIDGE_CONFIDENCE: std::ops::Range<f64> = 0.60..0.75;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptGroup {
    pub terms: Vec<String>,
    /// Fraction of the group's term pairs that get an edge, in `[0, 1]`.
    pub edge_density: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLink {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolysemyWire {
    /// Index into `concept_groups`.
    pub group: usize,
    /// How many of that group's leading members the term connects to.
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolysemyTerm {
    pub term: String,
    pub wiring: Vec<PolysemyWire>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub concept_groups: Vec<ConceptGroup>,
    #[serde(default)]
    pub chain_links: Vec<ChainLink>,
    #[serde(default)]
    pub polysemy_terms: Vec<PolysemyTerm>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

/// Generated data plus ground truth: `gold[t]` is the group a term truly
/// belongs to (for polysemous terms, the group with the most wires, ties
/// to the lowest group index).
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: TermTable,
    pub edges: Vec<VerifiedEdge>,
    pub gold: Vec<usize>,
    pub polysemy: Vec<TermId>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let invalid = |msg: String| Error::InvalidSpec { msg };
    if spec.concept_groups.is_empty() {
        return Err(invalid("at least one concept group is required".into()));
    }

    // Term ids: group members in listing order, then polysemous terms.
    let mut terms = Vec::new();
    let mut gold = Vec::new();
    let mut group_ids: Vec<Vec<TermId>> = Vec::new();
    for (gi, group) in spec.concept_groups.iter().enumerate() {
        if !(0.0..=1.0).contains(&group.edge_density) {
            return Err(invalid(format!(
                "group {gi} edge_density {} outside [0, 1]",
                group.edge_density
            )));
        }
        let ids = (0..group.terms.len())
            .map(|i| (terms.len() + i) as TermId)
            .collect();
        group_ids.push(ids);
        terms.extend(group.terms.iter().cloned());
        gold.extend(std::iter::repeat(gi).take(group.terms.len()));
    }
    let mut polysemy = Vec::new();
    for p in &spec.polysemy_terms {
        if p.wiring.is_empty() {
            return Err(invalid(format!("polysemy term {:?} has no wiring", p.term)));
        }
        let majority = p
            .wiring
            .iter()
            .map(|w| (w.group, w.count))
            .min_by_key(|&(g, c)| (std::cmp::Reverse(c), g))
            .expect("wiring checked non-empty")
            .0;
        polysemy.push(terms.len() as TermId);
        terms.push(p.term.clone());
        gold.push(majority);
    }
    let table = TermTable::from_terms(terms)?;

    // Topology first, in canonical enumeration order; the RNG is only
    // consulted afterwards, one draw per edge in that same order.
    let mut pairs: Vec<(TermId, TermId, bool)> = Vec::new();
    let mut seen: HashMap<(TermId, TermId), ()> = HashMap::new();
    let mut push = |pairs: &mut Vec<(TermId, TermId, bool)>,
                    a: TermId,
                    b: TermId,
                    bridge: bool|
     -> Result<()> {
        if a == b {
            return Err(Error::SelfPair { id: a });
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key, ()).is_some() {
            return Err(Error::InvalidSpec {
                msg: format!("duplicate edge between ids {} and {}", key.0, key.1),
            });
        }
        pairs.push((key.0, key.1, bridge));
        Ok(())
    };

    for (gi, group) in spec.concept_groups.iter().enumerate() {
        let ids = &group_ids[gi];
        let n = ids.len();
        let all = n * n.saturating_sub(1) / 2;
        let wanted = (group.edge_density * all as f64).ceil() as usize;
        let mut taken = 0;
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                if taken == wanted {
                    break 'outer;
                }
                push(&mut pairs, ids[i], ids[j], false)?;
                taken += 1;
            }
        }
    }
    for (pi, p) in spec.polysemy_terms.iter().enumerate() {
        let pid = polysemy[pi];
        for w in &p.wiring {
            let ids = group_ids.get(w.group).ok_or_else(|| invalid(format!(
                "polysemy term {:?} wires to missing group {}",
                p.term, w.group
            )))?;
            if w.count == 0 || w.count > ids.len() {
                return Err(invalid(format!(
                    "polysemy term {:?} wants {} wires into a group of {}",
                    p.term,
                    w.count,
                    ids.len()
                )));
            }
            for &m in &ids[..w.count] {
                push(&mut pairs, pid, m, true)?;
            }
        }
    }
    for link in &spec.chain_links {
        let a = table.id(&link.a).ok_or_else(|| {
            invalid(format!("chain link names unknown term {:?}", link.a))
        })?;
        let b = table.id(&link.b).ok_or_else(|| {
            invalid(format!("chain link names unknown term {:?}", link.b))
        })?;
        push(&mut pairs, a, b, true)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges = pairs
        .into_iter()
        .map(|(a, b, bridge)| {
            let confidence = if bridge {
                rng.gen_range(BRIDGE_CONFIDENCE)
            } else {
                rng.gen_range(STRONG_CONFIDENCE)
            };
            VerifiedEdge::new(a, b, confidence)
        })
        .collect::<Result<_>>()?;

    Ok(SyntheticData {
        table,
        edges,
        gold,
        polysemy,
    })
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns whether the two sets were distinct before the union.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Connected components over the edges, keeping only components with at
/// least two members — the baseline "clustering" that drift control is
/// measured against. Components are ordered by smallest member.
pub fn connected_components(n_terms: usize, edges: &[VerifiedEdge]) -> Vec<Vec<TermId>> {
    let mut uf = UnionFind::new(n_terms);
    for e in edges {
        uf.union(e.a as usize, e.b as usize);
    }
    let mut by_root: HashMap<usize, Vec<TermId>> = HashMap::new();
    for t in 0..n_terms {
        by_root.entry(uf.find(t)).or_default().push(t as TermId);
    }
    let mut components: Vec<Vec<TermId>> = by_root
        .into_values()
        .filter(|c| c.len() >= 2)
        .collect();
    components.sort_by_key(|c| c[0]);
    components
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub cluster_count: usize,
    pub cross_group_cluster_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub cluster_count: usize,
    /// Fraction of clusters whose members span more than one gold group.
    pub cross_group_cluster_fraction: f64,
    /// Fraction of polysemous terms that ended up in a cluster whose
    /// plurality gold group (over non-polysemous members) matches the
    /// term's own gold group. Unclustered terms and plurality ties count
    /// as failures; with no polysemous terms the metric is 1.0.
    pub polysemy_resolution_accuracy: f64,
    pub baseline_comparison: BaselineReport,
}

fn cross_group_fraction(clusters: &[Vec<TermId>], gold: &[usize]) -> f64 {
    if clusters.is_empty() {
        return 0.0;
    }
    let crossed = clusters
        .iter()
        .filter(|members| {
            let first = gold[members[0] as usize];
            members.iter().any(|&m| gold[m as usize] != first)
        })
        .count();
    crossed as f64 / clusters.len() as f64
}

fn polysemy_accuracy(data: &SyntheticData, clusters: &[Vec<TermId>]) -> f64 {
    if data.polysemy.is_empty() {
        return 1.0;
    }
    let is_polysemy: std::collections::HashSet<TermId> =
        data.polysemy.iter().copied().collect();
    let mut correct = 0usize;
    for &t in &data.polysemy {
        let Some(members) = clusters.iter().find(|c| c.binary_search(&t).is_ok()) else {
            continue; // unclustered: failure
        };
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &m in members {
            if m != t && !is_polysemy.contains(&m) {
                *counts.entry(data.gold[m as usize]).or_insert(0) += 1;
            }
        }
        let Some((&plural, &top)) = counts.iter().max_by_key(|&(_, &c)| c) else {
            continue; // no anchoring members: failure
        };
        let tied = counts.values().filter(|&&c| c == top).count() > 1;
        if !tied && plural == data.gold[t as usize] {
            correct += 1;
        }
    }
    correct as f64 / data.polysemy.len() as f64
}

/// Clusters the synthetic edges and scores contamination against the
/// connected-components baseline on the same graph.
pub fn evaluate(data: &SyntheticData, config: &ClusterConfig) -> ContaminationReport {
    let clusters = cluster_terms(&data.edges, config);
    let baseline = connected_components(data.table.len(), &data.edges);
    ContaminationReport {
        cluster_count: clusters.len(),
        cross_group_cluster_fraction: cross_group_fraction(&clusters, &data.gold),
        polysemy_resolution_accuracy: polysemy_accuracy(data, &clusters),
        baseline_comparison: BaselineReport {
            cluster_count: baseline.len(),
            cross_group_cluster_fraction: cross_group_fraction(&baseline, &data.gold),
        },
    }
}

/// Generates and evaluates in one step — what the command-line `eval`
/// phase runs.
pub fn run(spec: &SyntheticSpec, config: &ClusterConfig) -> Result<ContaminationReport> {
    let data = generate_synthetic(spec)?;
    Ok(evaluate(&data, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(names: &[&str], density: f64) -> ConceptGroup {
        ConceptGroup {
            terms: names.iter().map(|s| s.to_string()).collect(),
            edge_density: density,
        }
    }

    fn two_triangles_with_bridge() -> SyntheticSpec {
        SyntheticSpec {
            concept_groups: vec![
                group(&["a0", "a1", "a2"], 1.0),
                group(&["b0", "b1", "b2"], 1.0),
            ],
            chain_links: vec![ChainLink {
                a: "a2".into(),
                b: "b0".into(),
            }],
            polysemy_terms: vec![],
            seed: 7,
        }
    }

    #[test]
    fn topology_ignores_the_seed() {
        let mut spec = two_triangles_with_bridge();
        let e1 = generate_synthetic(&spec).unwrap().edges;
        spec.seed = 999;
        let e2 = generate_synthetic(&spec).unwrap().edges;
        let p1: Vec<_> = e1.iter().map(|e| e.pair()).collect();
        let p2: Vec<_> = e2.iter().map(|e| e.pair()).collect();
        assert_eq!(p1, p2);
        // ...but confidences move with it.
        assert!(e1
            .iter()
            .zip(&e2)
            .any(|(x, y)| x.confidence != y.confidence));
        // And the same seed reproduces everything bit for bit.
        spec.seed = 7;
        let e3 = generate_synthetic(&spec).unwrap().edges;
        assert_eq!(e1, e3);
    }

    #[test]
    fn density_takes_a_prefix_of_canonical_pairs() {
        let spec = SyntheticSpec {
            concept_groups: vec![group(&["w", "x", "y", "z"], 0.5)],
            chain_links: vec![],
            polysemy_terms: vec![],
            seed: 1,
        };
        // ceil(0.5 * 6) = 3 pairs: (0,1), (0,2), (0,3).
        let data = generate_synthetic(&spec).unwrap();
        let pairs: Vec<_> = data.edges.iter().map(|e| e.pair()).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3)]);

        let full = SyntheticSpec {
            concept_groups: vec![group(&["w", "x", "y", "z"], 1.0)],
            chain_links: vec![],
            polysemy_terms: vec![],
            seed: 1,
        };
        assert_eq!(generate_synthetic(&full).unwrap().edges.len(), 6);
    }

    #[test]
    fn confidence_ranges_separate_bridges_from_group_edges() {
        let data = generate_synthetic(&two_triangles_with_bridge()).unwrap();
        for e in &data.edges {
            let is_bridge = e.pair() == (2, 3);
            if is_bridge {
                assert!((0.60..0.75).contains(&e.confidence), "{e:?}");
            } else {
                assert!((0.85..0.99).contains(&e.confidence), "{e:?}");
            }
        }
    }

    #[test]
    fn polysemy_wiring_sits_in_the_bridge_band() {
        let spec = SyntheticSpec {
            concept_groups: vec![
                group(&["a0", "a1", "a2"], 1.0),
                group(&["b0", "b1", "b2"], 1.0),
            ],
            chain_links: vec![],
            polysemy_terms: vec![PolysemyTerm {
                term: "p".into(),
                wiring: vec![
                    PolysemyWire { group: 0, count: 3 },
                    PolysemyWire { group: 1, count: 1 },
                ],
            }],
            seed: 5,
        };
        let data = generate_synthetic(&spec).unwrap();
        let pid = *data.polysemy.first().unwrap();
        for e in &data.edges {
            let (a, b) = e.pair();
            if a == pid || b == pid {
                assert!((0.60..0.75).contains(&e.confidence), "{e:?}");
            } else {
                assert!((0.85..0.99).contains(&e.confidence), "{e:?}");
            }
        }
    }

    #[test]
    fn polysemy_gold_is_majority_wired_group_with_low_tie() {
        let spec = SyntheticSpec {
            concept_groups: vec![
                group(&["a0", "a1", "a2"], 1.0),
                group(&["b0", "b1", "b2"], 1.0),
            ],
            chain_links: vec![],
            polysemy_terms: vec![
                PolysemyTerm {
                    term: "p_major".into(),
                    wiring: vec![
                        PolysemyWire { group: 0, count: 1 },
                        PolysemyWire { group: 1, count: 3 },
                    ],
                },
                PolysemyTerm {
                    term: "p_tied".into(),
                    wiring: vec![
                        PolysemyWire { group: 1, count: 2 },
                        PolysemyWire { group: 0, count: 2 },
                    ],
                },
            ],
            seed: 3,
        };
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.polysemy, vec![6, 7]);
        assert_eq!(data.gold[6], 1, "majority of wires decides");
        assert_eq!(data.gold[7], 0, "ties fall to the lower group index");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = two_triangles_with_bridge();
        spec.chain_links[0].b = "nope".into();
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSpec { .. })
        ));

        let mut spec = two_triangles_with_bridge();
        spec.chain_links = vec![
            ChainLink { a: "a0".into(), b: "a1".into() },
        ];
        // Duplicates an intra-group edge.
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSpec { .. })
        ));

        let mut spec = two_triangles_with_bridge();
        spec.concept_groups[0].edge_density = 1.5;
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSpec { .. })
        ));

        let mut spec = two_triangles_with_bridge();
        spec.polysemy_terms = vec![PolysemyTerm {
            term: "p".into(),
            wiring: vec![PolysemyWire { group: 5, count: 1 }],
        }];
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSpec { .. })
        ));

        let mut spec = two_triangles_with_bridge();
        spec.polysemy_terms = vec![PolysemyTerm {
            term: "p".into(),
            wiring: vec![PolysemyWire { group: 0, count: 9 }],
        }];
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSpec { .. })
        ));
    }

    #[test]
    fn union_find_merges_and_tracks_roots() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0), "already merged");
        assert_eq!(uf.find(0), uf.find(1));
        assert_ne!(uf.find(0), uf.find(3));
        assert!(uf.union(1, 3));
        assert_eq!(uf.find(4), uf.find(0));
        assert_ne!(uf.find(2), uf.find(0));
    }

    #[test]
    fn components_keep_only_multi_member_sets() {
        let edges = vec![
            VerifiedEdge::new(0, 1, 0.9).unwrap(),
            VerifiedEdge::new(1, 2, 0.9).unwrap(),
            VerifiedEdge::new(4, 5, 0.9).unwrap(),
        ];
        // Term 3 is isolated and must not appear as a singleton component.
        assert_eq!(
            connected_components(6, &edges),
            vec![vec![0, 1, 2], vec![4, 5]]
        );
    }

    #[test]
    fn bridged_groups_contaminate_baseline_but_not_drift_clustering() {
        let data = generate_synthetic(&two_triangles_with_bridge()).unwrap();
        let report = evaluate(&data, &ClusterConfig::default());
        // The chain link fuses everything into one baseline component.
        assert_eq!(report.baseline_comparison.cluster_count, 1);
        assert_eq!(report.baseline_comparison.cross_group_cluster_fraction, 1.0);
        // Drift control keeps the two triangles apart.
        assert_eq!(report.cluster_count, 2);
        assert_eq!(report.cross_group_cluster_fraction, 0.0);
        assert_eq!(report.polysemy_resolution_accuracy, 1.0);
    }

    #[test]
    fn majority_wired_polysemy_lands_in_its_gold_cluster() {
        let spec = SyntheticSpec {
            concept_groups: vec![
                group(&["a0", "a1", "a2", "a3"], 1.0),
                group(&["b0", "b1", "b2", "b3"], 1.0),
            ],
            chain_links: vec![],
            polysemy_terms: vec![PolysemyTerm {
                term: "p".into(),
                wiring: vec![
                    PolysemyWire { group: 0, count: 2 },
                    PolysemyWire { group: 1, count: 4 },
                ],
            }],
            seed: 11,
        };
        let data = generate_synthetic(&spec).unwrap();
        let report = evaluate(&data, &ClusterConfig::default());
        assert_eq!(report.polysemy_resolution_accuracy, 1.0);
    }

    #[test]
    fn spec_parses_from_json_with_defaults() {
        let json = r#"{
            "concept_groups": [
                {"terms": ["x", "y"], "edge_density": 1.0}
            ]
        }"#;
        let spec: SyntheticSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.seed, 42);
        assert!(spec.chain_links.is_empty());
        assert!(spec.polysemy_terms.is_empty());
        let report = run(&spec, &ClusterConfig::default()).unwrap();
        assert_eq!(report.cluster_count, 1);

        let bad = r#"{"concept_groups": [], "unknown_field": 1}"#;
        assert!(serde_json::from_str::<SyntheticSpec>(bad).is_err());
    }
}

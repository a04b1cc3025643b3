//! Representative ("parent") selection for finished clusters.
//!
//! The parent is the member other members are folded into downstream, so
//! it should be the most canonical surface form. Two signals decide it:
//! membership in a reference dictionary of preferred forms (exact string
//! match), and centrality — cosine against the cluster centroid. Any
//! dictionary member outranks every non-dictionary member; within the
//! candidate pool, the highest centroid cosine wins and ties go to the
//! smallest term id.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::embedding::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::types::{FinalCluster, TermId, TermTable};

/// Two candidate scores within this distance count as tied. Symmetric
/// clusters produce scores that are equal in exact arithmetic but differ
/// in practice — storing rows as f32 perturbs each component by up to one
/// ulp (~1e-7 noise in a cosine), and f64 accumulation order adds more —
/// so without a tolerance the id tie-break would effectively never fire
/// and the winner would be decided by rounding noise.
const SCORE_EPSILON: f64 = 1e-6;

/// Reference list of preferred surface forms, one per line.
#[derive(Debug, Clone, Default)]
pub struct ParentDictionary {
    terms: HashSet<String>,
}

impl ParentDictionary {
    pub fn from_terms<I: IntoIterator<Item = String>>(terms: I) -> Self {
        ParentDictionary {
            terms: terms.into_iter().collect(),
        }
    }

    /// Loads one term per line. Duplicates are fine (it is a set); an
    /// empty line is a data error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut terms = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                return Err(Error::EmptyTerm { line: i + 1 });
            }
            terms.insert(line.to_string());
        }
        Ok(ParentDictionary { terms })
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Normalized mean of the members' vectors, accumulated in f64 so member
/// order cannot change the result. `None` when the vectors cancel out and
/// the mean has no direction.
pub fn compute_centroid(
    members: &[TermId],
    matrix: &EmbeddingMatrix,
) -> Result<Option<Vec<f32>>> {
    let dim = matrix.dim();
    let mut sum = vec![0f64; dim];
    for &m in members {
        let row = matrix
            .get_row(m)
            .ok_or(Error::UnknownTermId { id: m })?;
        for (s, &v) in sum.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(sum.iter().map(|&v| (v / norm) as f32).collect()))
}

/// Scores every pool candidate and keeps the best, walking candidates in
/// ascending id order and replacing the incumbent only on a score more
/// than [`SCORE_EPSILON`] higher — so ties resolve to the smallest id.
fn best_by_score(pool: &[TermId], mut score: impl FnMut(TermId) -> f64) -> TermId {
    let mut best = pool[0];
    let mut best_score = score(best);
    for &candidate in &pool[1..] {
        let s = score(candidate);
        if s > best_score + SCORE_EPSILON {
            best = candidate;
            best_score = s;
        }
    }
    best
}

/// Picks the parent of one cluster. `members` must be sorted ascending and
/// non-empty (finished clusters always have at least two members).
pub fn select_parent(
    members: &[TermId],
    matrix: &EmbeddingMatrix,
    table: &TermTable,
    dictionary: Option<&ParentDictionary>,
) -> Result<TermId> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    for &m in members {
        table.term(m)?;
    }

    // Dictionary members form the candidate pool when any exist.
    let pool: Vec<TermId> = match dictionary {
        Some(dict) => {
            let hits: Vec<TermId> = members
                .iter()
                .copied()
                .filter(|&m| dict.contains(table.term(m).expect("checked above")))
                .collect();
            if hits.is_empty() {
                members.to_vec()
            } else {
                hits
            }
        }
        None => members.to_vec(),
    };

    match compute_centroid(members, matrix)? {
        Some(centroid) => Ok(best_by_score(&pool, |m| {
            cosine(matrix.row(m), &centroid)
        })),
        None => {
            // Directionless centroid: fall back to total pairwise cosine
            // against the other members.
            Ok(best_by_score(&pool, |m| {
                members
                    .iter()
                    .filter(|&&o| o != m)
                    .map(|&o| cosine(matrix.row(m), matrix.row(o)))
                    .sum()
            }))
        }
    }
}

/// Assigns parents to every cluster, producing finished clusters with
/// dense ids in the input order.
pub fn assign_parents(
    clusters: &[Vec<TermId>],
    matrix: &EmbeddingMatrix,
    table: &TermTable,
    dictionary: Option<&ParentDictionary>,
) -> Result<Vec<FinalCluster>> {
    clusters
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let parent = select_parent(members, matrix, table, dictionary)?;
            FinalCluster::new(i as u32, parent, members.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(angles_deg: &[f64]) -> EmbeddingMatrix {
        let rows: Vec<Vec<f32>> = angles_deg
            .iter()
            .map(|a| {
                let r = a.to_radians();
                vec![r.cos() as f32, r.sin() as f32]
            })
            .collect();
        EmbeddingMatrix::from_rows(&rows).unwrap()
    }

    fn table(n: usize) -> TermTable {
        TermTable::from_terms((0..n).map(|i| format!("t{i}")).collect()).unwrap()
    }

    #[test]
    fn centroid_is_normalized_mean() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = compute_centroid(&[0, 1], &m).unwrap().unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2 as f32;
        assert!((c[0] - inv).abs() < 1e-6);
        assert!((c[1] - inv).abs() < 1e-6);
    }

    #[test]
    fn cancelling_vectors_have_no_centroid() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(compute_centroid(&[0, 1], &m).unwrap(), None);
    }

    #[test]
    fn unknown_member_is_reported() {
        let m = planar(&[0.0, 10.0]);
        assert!(matches!(
            compute_centroid(&[0, 7], &m),
            Err(Error::UnknownTermId { id: 7 })
        ));
        assert!(matches!(
            select_parent(&[0, 7], &m, &table(2), None),
            Err(Error::UnknownTermId { id: 7 })
        ));
    }

    #[test]
    fn most_central_member_wins_regardless_of_id() {
        // Angles 0, 25, 20: the centroid sits near 15 degrees, so the
        // member at 20 degrees — deliberately the highest id — wins.
        let m = planar(&[0.0, 25.0, 20.0]);
        assert_eq!(select_parent(&[0, 1, 2], &m, &table(3), None).unwrap(), 2);
    }

    #[test]
    fn symmetric_pair_ties_to_smaller_id() {
        // Both members are mathematically equidistant from the centroid;
        // rounding noise must not decide this.
        let m = planar(&[0.0, 5.0]);
        assert_eq!(select_parent(&[0, 1], &m, &table(2), None).unwrap(), 0);
        // Same geometry with ids swapped still picks the smaller id.
        let m = planar(&[5.0, 0.0]);
        assert_eq!(select_parent(&[0, 1], &m, &table(2), None).unwrap(), 0);
    }

    #[test]
    fn dictionary_member_beats_more_central_terms() {
        let m = planar(&[0.0, 25.0, 20.0]);
        let dict = ParentDictionary::from_terms(["t0".to_string()]);
        assert_eq!(
            select_parent(&[0, 1, 2], &m, &table(3), Some(&dict)).unwrap(),
            0
        );
    }

    #[test]
    fn multiple_dictionary_members_rank_by_centrality() {
        let m = planar(&[0.0, 25.0, 20.0]);
        let dict = ParentDictionary::from_terms(["t0".to_string(), "t1".to_string()]);
        // Pool is {0, 1}; 1 at 25 degrees is closer to the ~15-degree
        // centroid than 0 at 0 degrees.
        assert_eq!(
            select_parent(&[0, 1, 2], &m, &table(3), Some(&dict)).unwrap(),
            1
        );
    }

    #[test]
    fn dictionary_without_matches_falls_back_to_all_members() {
        let m = planar(&[0.0, 25.0, 20.0]);
        let dict = ParentDictionary::from_terms(["elsewhere".to_string()]);
        assert_eq!(
            select_parent(&[0, 1, 2], &m, &table(3), Some(&dict)).unwrap(),
            2
        );
    }

    #[test]
    fn cancelled_centroid_uses_pairwise_fallback() {
        // Antipodal pair: every member's total pairwise cosine is equal,
        // so the smaller id wins; a dictionary hit still dominates.
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(select_parent(&[0, 1], &m, &table(2), None).unwrap(), 0);
        let dict = ParentDictionary::from_terms(["t1".to_string()]);
        assert_eq!(
            select_parent(&[0, 1], &m, &table(2), Some(&dict)).unwrap(),
            1
        );
    }

    #[test]
    fn assign_parents_numbers_clusters_densely() {
        let m = planar(&[0.0, 5.0, 90.0, 95.0]);
        let clusters = vec![vec![0, 1], vec![2, 3]];
        let finals = assign_parents(&clusters, &m, &table(4), None).unwrap();
        assert_eq!(finals.len(), 2);
        assert_eq!(finals[0].cluster_id, 0);
        assert_eq!(finals[0].parent, 0);
        assert_eq!(finals[0].members, vec![0, 1]);
        assert_eq!(finals[1].cluster_id, 1);
        assert_eq!(finals[1].parent, 2);
    }

    #[test]
    fn dictionary_loads_and_rejects_empty_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.txt");
        std::fs::write(&path, "alpha\nbeta\nalpha\n").unwrap();
        let dict = ParentDictionary::load(&path).unwrap();
        assert_eq!(dict.len(), 2);
        assert!(dict.contains("alpha"));
        assert!(!dict.contains("gamma"));

        std::fs::write(&path, "alpha\n\nbeta\n").unwrap();
        assert!(matches!(
            ParentDictionary::load(&path),
            Err(Error::EmptyTerm { line: 2 })
        ));
    }

    #[test]
    fn empty_member_list_is_rejected() {
        let m = planar(&[0.0]);
        assert!(matches!(
            select_parent(&[], &m, &table(1), None),
            Err(Error::EmptyCluster)
        ));
    }
}

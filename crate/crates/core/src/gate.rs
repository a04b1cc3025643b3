//! Relation gate: turns cosine candidates into verified synonym edges.
//!
//! High cosine similarity conflates synonyms with antonyms and co-hyponyms,
//! so every candidate pair is passed to a [`RelationScorer`] that labels the
//! pair in both directions. A candidate survives only if:
//!
//! 1. the forward direction is `synonym` with confidence strictly above the
//!    threshold;
//! 2. the reverse direction does not veto it (see [`ConflictPolicy`]);
//! 3. its edge confidence — the minimum of the two directions when both are
//!    `synonym`, the forward confidence otherwise — is itself strictly above
//!    the threshold.
//!
//! The strictness matters: an edge with confidence exactly at the threshold
//! is dropped, so every emitted edge satisfies `confidence > threshold`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{RelationLabel, ScoredCandidate, TermId, TermTable, VerifiedEdge};

/// Labels an ordered pair of terms. Implementations must be cheap to call
/// from many threads; fallible backends report errors through the boxed
/// error, which the gate wraps with the offending pair.
pub trait RelationScorer: Send + Sync {
    fn score(
        &self,
        a: TermId,
        b: TermId,
    ) -> std::result::Result<(RelationLabel, f64), Box<dyn std::error::Error + Send + Sync>>;
}

/// What a conflicting reverse judgment does to a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictPolicy {
    /// Drop the pair only when the reverse direction is labeled `antonym`.
    /// A reverse `cohyponym` (or low-confidence synonym) leaves the forward
    /// judgment standing, though step 3 still applies.
    #[default]
    ReverseAntonymVeto,
    /// Drop the pair unless the reverse direction is also `synonym` with
    /// confidence strictly above the threshold. Keeps a subset of what
    /// [`ConflictPolicy::ReverseAntonymVeto`] keeps.
    RequireMutualSynonym,
}

#[derive(Debug, Clone, Copy)]
pub struct GateConfig {
    /// Edges must end up strictly above this confidence.
    pub synonym_confidence_threshold: f64,
    pub conflict_policy: ConflictPolicy,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            synonym_confidence_threshold: 0.70,
            conflict_policy: ConflictPolicy::default(),
        }
    }
}

/// Deterministic scorer backed by a table of directed judgments, with a
/// default for pairs the table does not mention. Lookups are directional:
/// the row `(a, b)` answers queries for `a -> b` only.
pub struct TableScorer {
    entries: HashMap<(TermId, TermId), (RelationLabel, f64)>,
    default_label: RelationLabel,
    default_confidence: f64,
}

impl TableScorer {
    pub fn new(default_label: RelationLabel, default_confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&default_confidence) {
            return Err(Error::BadConfidence {
                value: default_confidence,
            });
        }
        Ok(TableScorer {
            entries: HashMap::new(),
            default_label,
            default_confidence,
        })
    }

    /// Inserts a directed judgment. Duplicate directions are a data error.
    pub fn insert(
        &mut self,
        a: TermId,
        b: TermId,
        label: RelationLabel,
        confidence: f64,
    ) -> Result<()> {
        if a == b {
            return Err(Error::SelfPair { id: a });
        }
        if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
            return Err(Error::BadConfidence { value: confidence });
        }
        if self.entries.insert((a, b), (label, confidence)).is_some() {
            return Err(Error::InvalidConfig {
                msg: format!("duplicate scorer row for directed pair ({a}, {b})"),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads judgments from TSV rows `term_a\tterm_b\tlabel\tconfidence`.
    /// Terms are strings resolved against `table`; labels are `synonym`,
    /// `antonym`, or `cohyponym`. Each row covers one direction only.
    pub fn load(
        path: &Path,
        table: &TermTable,
        default_label: RelationLabel,
        default_confidence: f64,
    ) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scorer = TableScorer::new(default_label, default_confidence)?;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(path, ln, "expected 4 tab-separated columns"));
            }
            let a = table
                .id(cols[0])
                .ok_or_else(|| Error::parse(path, ln, format!("unknown term {:?}", cols[0])))?;
            let b = table
                .id(cols[1])
                .ok_or_else(|| Error::parse(path, ln, format!("unknown term {:?}", cols[1])))?;
            let label = RelationLabel::parse(cols[2])
                .ok_or_else(|| Error::parse(path, ln, format!("unknown label {:?}", cols[2])))?;
            let confidence: f64 = cols[3]
                .parse()
                .map_err(|_| Error::parse(path, ln, "bad confidence"))?;
            scorer
                .insert(a, b, label, confidence)
                .map_err(|e| Error::parse(path, ln, e.to_string()))?;
        }
        Ok(scorer)
    }
}

impl RelationScorer for TableScorer {
    fn score(
        &self,
        a: TermId,
        b: TermId,
    ) -> std::result::Result<(RelationLabel, f64), Box<dyn std::error::Error + Send + Sync>> {
        Ok(self
            .entries
            .get(&(a, b))
            .copied()
            .unwrap_or((self.default_label, self.default_confidence)))
    }
}

fn score_checked(
    scorer: &dyn RelationScorer,
    a: TermId,
    b: TermId,
) -> Result<(RelationLabel, f64)> {
    let (label, confidence) = scorer
        .score(a, b)
        .map_err(|source| Error::Scorer { a, b, source })?;
    if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
        return Err(Error::BadConfidence { value: confidence });
    }
    Ok((label, confidence))
}

/// Gates one candidate. Returns the verified edge, or `None` when any of
/// the three steps rejects it.
pub fn gate_pair(
    scorer: &dyn RelationScorer,
    a: TermId,
    b: TermId,
    config: &GateConfig,
) -> Result<Option<VerifiedEdge>> {
    let threshold = config.synonym_confidence_threshold;
    let (fwd_label, fwd_conf) = score_checked(scorer, a, b)?;
    if fwd_label != RelationLabel::Synonym || fwd_conf <= threshold {
        return Ok(None);
    }
    let (rev_label, rev_conf) = score_checked(scorer, b, a)?;
    match config.conflict_policy {
        ConflictPolicy::ReverseAntonymVeto => {
            if rev_label == RelationLabel::Antonym {
                return Ok(None);
            }
        }
        ConflictPolicy::RequireMutualSynonym => {
            if rev_label != RelationLabel::Synonym || rev_conf <= threshold {
                return Ok(None);
            }
        }
    }
    let confidence = if rev_label == RelationLabel::Synonym {
        fwd_conf.min(rev_conf)
    } else {
        fwd_conf
    };
    if confidence <= threshold {
        return Ok(None);
    }
    Ok(Some(VerifiedEdge::new(a, b, confidence)?))
}

/// Gates every candidate, preserving candidate order among survivors.
/// Candidates are scored in parallel; the ordered collect keeps the output
/// independent of thread count.
pub fn gate_candidates(
    candidates: &[ScoredCandidate],
    scorer: &dyn RelationScorer,
    config: &GateConfig,
) -> Result<Vec<VerifiedEdge>> {
    let gated: Vec<Option<VerifiedEdge>> = candidates
        .par_iter()
        .map(|c| gate_pair(scorer, c.a, c.b, config))
        .collect::<Result<_>>()?;
    Ok(gated.into_iter().flatten().collect())
}

/// Writes edges as TSV rows `a_id\tb_id\tconfidence` with six decimals.
pub fn write_edges(path: &Path, edges: &[VerifiedEdge]) -> Result<()> {
    let mut out = String::new();
    for e in edges {
        out.push_str(&format!("{}\t{}\t{:.6}\n", e.a, e.b, e.confidence));
    }
    crate::types::write_text(path, &out)
}

/// Reads an edge TSV, enforcing `a < b` per row and strictly ascending row
/// order — the shape [`gate_candidates`] produces.
pub fn read_edges(path: &Path) -> Result<Vec<VerifiedEdge>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<VerifiedEdge> = Vec::new();
    let mut prev: Option<(TermId, TermId)> = None;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(path, ln, "expected 3 tab-separated columns"));
        }
        let a: TermId = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad term id"))?;
        let b: TermId = cols[1]
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad term id"))?;
        let confidence: f64 = cols[2]
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad confidence"))?;
        if a >= b {
            return Err(Error::parse(path, ln, "pair not in canonical order"));
        }
        if let Some(p) = prev {
            if (a, b) <= p {
                return Err(Error::parse(path, ln, "rows not strictly ascending"));
            }
        }
        prev = Some((a, b));
        out.push(
            VerifiedEdge::new(a, b, confidence).map_err(|e| Error::parse(path, ln, e.to_string()))?,
        );
    }
    Ok(out)
}

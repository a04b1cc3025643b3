//! Term identities and the value types passed between pipeline phases.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terms are addressed by their zero-based line number in the terms file.
pub type TermId = u32;

/// Interned term list. The id of a term is its position in the source file,
/// so files and in-memory tables agree without a separate id map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermTable {
    terms: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl TermTable {
    /// Builds a table from an ordered term list. Terms must be non-empty and
    /// unique; the reported line numbers are one-based.
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(terms.len());
        for (i, term) in terms.iter().enumerate() {
            if term.is_empty() {
                return Err(Error::EmptyTerm { line: i + 1 });
            }
            if let Some(&first) = ids.get(term.as_str()) {
                return Err(Error::DuplicateTerm {
                    term: term.clone(),
                    first: first as usize + 1,
                    second: i + 1,
                });
            }
            ids.insert(term.clone(), i as TermId);
        }
        Ok(TermTable { terms, ids })
    }

    /// Reads a UTF-8 terms file, one term per line, LF-terminated.
    /// An empty file yields an empty table.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let terms: Vec<String> = text.lines().map(str::to_owned).collect();
        Self::from_terms(terms)
    }

    /// Writes the table in the same one-term-per-line format it is read from.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for term in &self.terms {
            out.push_str(term);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    /// Like [`get`](Self::get) but unknown ids are an error.
    pub fn term(&self, id: TermId) -> Result<&str> {
        self.get(id).ok_or(Error::UnknownTermId { id })
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, &str)> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| (i as TermId, t.as_str()))
    }
}

/// Relation predicted for an ordered term pair. The numeric codes are stable
/// and must never be renumbered: they appear in serialized artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Antonym = 0,
    Cohyponym = 1,
    Synonym = 2,
}

impl RelationLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RelationLabel::Antonym),
            1 => Some(RelationLabel::Cohyponym),
            2 => Some(RelationLabel::Synonym),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Antonym => "antonym",
            RelationLabel::Cohyponym => "cohyponym",
            RelationLabel::Synonym => "synonym",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "antonym" => Some(RelationLabel::Antonym),
            "cohyponym" => Some(RelationLabel::Cohyponym),
            "synonym" => Some(RelationLabel::Synonym),
            _ => None,
        }
    }
}

/// Undirected candidate pair proposed by the vector index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub a: TermId,
    pub b: TermId,
    pub cosine: f64,
}

impl ScoredCandidate {
    /// Canonicalizes the pair so that `a < b`. Self-pairs are rejected.
    pub fn new(x: TermId, y: TermId, cosine: f64) -> Result<Self> {
        if x == y {
            return Err(Error::SelfPair { id: x });
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Ok(ScoredCandidate { a, b, cosine })
    }

    pub fn pair(&self) -> (TermId, TermId) {
        (self.a, self.b)
    }
}

/// Synonym edge that survived the relation gate, with its final confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifiedEdge {
    pub a: TermId,
    pub b: TermId,
    pub confidence: f64,
}

impl VerifiedEdge {
    /// Canonicalizes the pair so that `a < b`. Self-pairs and confidences
    /// outside `[0, 1]` are rejected.
    pub fn new(x: TermId, y: TermId, confidence: f64) -> Result<Self> {
        if x == y {
            return Err(Error::SelfPair { id: x });
        }
        if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::BadConfidence { value: confidence });
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Ok(VerifiedEdge { a, b, confidence })
    }

    pub fn pair(&self) -> (TermId, TermId) {
        (self.a, self.b)
    }
}

/// A finished cluster: at least two members, parent drawn from the members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalCluster {
    pub cluster_id: u32,
    pub parent: TermId,
    pub members: Vec<TermId>,
}

impl FinalCluster {
    /// Validates the cluster contract: two or more members, sorted and
    /// duplicate-free, with the parent among them.
    pub fn new(cluster_id: u32, parent: TermId, mut members: Vec<TermId>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.len() < 2 {
            return Err(Error::ClusterTooSmall { cluster_id });
        }
        if !members.contains(&parent) {
            return Err(Error::ParentNotMember { parent, cluster_id });
        }
        Ok(FinalCluster {
            cluster_id,
            parent,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Writes `text` to `path`, creating parent directories as needed.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

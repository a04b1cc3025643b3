//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::types::TermId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic, not a {expected} file")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate term {term:?} at lines {first} and {second}")]
    DuplicateTerm {
        term: String,
        first: usize,
        second: usize,
    },

    #[error("empty term at line {line}")]
    EmptyTerm { line: usize },

    #[error("expected {expected} embedding rows, file has {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("zero-norm embedding row {row}")]
    ZeroNormRow { row: usize },

    #[error("non-finite value in embedding row {row}")]
    NonFiniteRow { row: usize },

    #[error("zero-norm query vector")]
    ZeroNormQuery,

    #[error("sample of {sample} vectors is smaller than nlist {nlist}")]
    SampleTooSmall { sample: usize, nlist: usize },

    #[error("unknown term id {id}")]
    UnknownTermId { id: TermId },

    #[error("self-pair on term id {id}")]
    SelfPair { id: u32 },

    #[error("confidence {value} outside [0, 1]")]
    BadConfidence { value: f64 },

    #[error("scorer failed on pair ({a}, {b}): {source}")]
    Scorer {
        a: TermId,
        b: TermId,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },

    #[error("cluster {cluster_id} has fewer than two members")]
    ClusterTooSmall { cluster_id: u32 },

    #[error("parent id {parent} is not a member of cluster {cluster_id}")]
    ParentNotMember { parent: u32, cluster_id: u32 },

    #[error("cannot select a parent for an empty cluster")]
    EmptyCluster,

    #[error("missing upstream artifact {path}: run the earlier phases first")]
    MissingArtifact { path: PathBuf },

    #[error(
        "config hash {current} does not match manifest hash {recorded}: \
         intermediates are stale, re-run from the index phase"
    )]
    ConfigMismatch { current: String, recorded: String },

    #[error("input {name} changed since the index phase ran")]
    InputChanged { name: String },

    #[error("invalid config: {msg}")]
    InvalidConfig { msg: String },

    #[error("invalid synthetic spec: {msg}")]
    InvalidSpec { msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

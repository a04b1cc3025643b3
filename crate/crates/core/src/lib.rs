//! Antonym-free synonym clusters from term embeddings.
//!
//! The pipeline runs in fixed phases: an inverted-file index over quantized
//! embeddings proposes candidate pairs by cosine similarity, a relation gate
//! keeps only confident and symmetric synonym predictions, a drift-limiting
//! expansion grows clusters edge by edge, majority voting resolves terms that
//! landed in more than one cluster, and every final cluster is named by a
//! dictionary hit or its most central member.
//!
//! Plain connected components over synonym edges drift: chains of pairwise
//! synonyms pull unrelated terms into one giant cluster. Expansion here
//! re-tests every join against the cluster's current members instead of
//! following edges transitively, which is what keeps chain ends apart.
//!
//! [`pipeline`] wires the phases together over flat files; every other module
//! is usable on its own.

pub mod cluster;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gate;
pub mod ivf;
pub mod kmeans;
pub mod parent;
pub mod pipeline;
pub mod quant;
pub mod stats;
pub mod types;

pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use types::{FinalCluster, RelationLabel, ScoredCandidate, TermId, TermTable, VerifiedEdge};

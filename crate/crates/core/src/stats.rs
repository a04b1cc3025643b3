//! Summary statistics over finished clusters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FinalCluster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster_count: usize,
    /// Lower median of the cluster sizes (the element at index
    /// `(n - 1) / 2` of the sorted sizes), so it is always an actual size.
    pub median_size: usize,
    /// Mean cluster size, rounded half-away-from-zero to two decimals.
    pub mean_size: f64,
    pub max_size: usize,
    /// Terms that ended up in no cluster.
    pub unclustered_term_count: usize,
}

/// Computes stats for disjoint clusters over a vocabulary of
/// `total_terms` terms.
pub fn compute_stats(clusters: &[FinalCluster], total_terms: usize) -> Result<ClusterStats> {
    let mut sizes: Vec<usize> = clusters.iter().map(|c| c.members.len()).collect();
    sizes.sort_unstable();
    let clustered: usize = sizes.iter().sum();
    if clustered > total_terms {
        return Err(Error::CountMismatch {
            expected: total_terms,
            found: clustered,
        });
    }
    let n = sizes.len();
    let (median_size, mean_size, max_size) = if n == 0 {
        (0, 0.0, 0)
    } else {
        let mean = clustered as f64 / n as f64;
        (sizes[(n - 1) / 2], (mean * 100.0).round() / 100.0, sizes[n - 1])
    };
    Ok(ClusterStats {
        cluster_count: n,
        median_size,
        mean_size,
        max_size,
        unclustered_term_count: total_terms - clustered,
    })
}

pub fn write_stats(path: &Path, stats: &ClusterStats) -> Result<()> {
    let json = serde_json::to_string_pretty(stats).expect("stats always serialize");
    crate::types::write_text(path, &format!("{json}\n"))
}

pub fn read_stats(path: &Path) -> Result<ClusterStats> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))
}

//! Spherical k-means over unit vectors.
//!
//! Seeding follows the k-means++ scheme with angular distance `1 - cos`;
//! assignment is argmax cosine, which for unit vectors is argmax dot. The
//! whole procedure is deterministic for a fixed seed: the RNG is a seeded
//! ChaCha stream and every reduction runs in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trains `k` unit-normalized centroids over `count = data.len() / dim`
/// unit vectors. Cells left empty by an assignment round are re-seeded from
/// the points farthest from their own centroid.
pub fn train(data: &[f32], dim: usize, k: usize, iters: usize, seed: u64) -> Result<Vec<f32>> {
    assert!(dim > 0, "dimension must be positive");
    assert_eq!(data.len() % dim, 0, "data length must be a multiple of dim");
    let count = data.len() / dim;
    if count < k || k == 0 {
        return Err(Error::SampleTooSmall {
            sample: count,
            nlist: k,
        });
    }

    let mut centroids = seed_plus_plus(data, dim, k, count, seed);
    for _ in 0..iters {
        // Assignment is embarrassingly parallel; each point's argmax is
        // independent of thread count.
        let assigned: Vec<(u32, f64)> = (0..count)
            .into_par_iter()
            .map(|i| nearest_centroid(point(data, dim, i), &centroids, dim))
            .collect();

        let mut assign: Vec<u32> = assigned.iter().map(|&(c, _)| c).collect();
        let mut counts = vec![0usize; k];
        for &c in &assign {
            counts[c as usize] += 1;
        }

        // Re-seed empty cells from the farthest points before accumulating,
        // lowest cell first, farthest unclaimed point first.
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            let mut by_distance: Vec<usize> = (0..count).collect();
            by_distance.sort_by(|&x, &y| {
                assigned[y]
                    .1
                    .total_cmp(&assigned[x].1)
                    .then(x.cmp(&y))
            });
            let mut next = by_distance.into_iter();
            for cell in empty {
                for i in next.by_ref() {
                    let old = assign[i] as usize;
                    if counts[old] > 1 {
                        counts[old] -= 1;
                        counts[cell] += 1;
                        assign[i] = cell as u32;
                        break;
                    }
                }
            }
        }

        // Sequential accumulation keeps float sums independent of thread
        // count.
        let mut sums = vec![0f64; k * dim];
        for (i, &c) in assign.iter().enumerate() {
            let row = point(data, dim, i);
            let acc = &mut sums[c as usize * dim..(c as usize + 1) * dim];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        for c in 0..k {
            let acc = &sums[c * dim..(c + 1) * dim];
            let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
            let out = &mut centroids[c * dim..(c + 1) * dim];
            if norm == 0.0 {
                // Antipodal members cancelled out; keep the previous
                // centroid rather than emit a zero vector.
                continue;
            }
            for (o, &v) in out.iter_mut().zip(acc) {
                *o = (v / norm) as f32;
            }
        }
    }
    Ok(centroids)
}

/// Returns `(cell, angular distance)` of the best centroid for `p`, ties
/// resolved toward the lower cell index.
pub fn nearest_centroid(p: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let k = centroids.len() / dim;
    let mut best = 0u32;
    let mut best_dot = f64::NEG_INFINITY;
    for c in 0..k {
        let d = crate::embedding::dot(p, &centroids[c * dim..(c + 1) * dim]);
        if d > best_dot {
            best_dot = d;
            best = c as u32;
        }
    }
    (best, 1.0 - best_dot)
}

fn point(data: &[f32], dim: usize, i: usize) -> &[f32] {
    &data[i * dim..(i + 1) * dim]
}

fn seed_plus_plus(data: &[f32], dim: usize, k: usize, count: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; count];

    let first = rng.gen_range(0..count);
    centroids.extend_from_slice(point(data, dim, first));
    chosen[first] = true;

    let mut dist: Vec<f64> = (0..count)
        .map(|i| (1.0 - crate::embedding::dot(point(data, dim, i), &centroids[..dim])).max(0.0))
        .collect();
    dist[first] = 0.0;

    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = None;
            for (i, &d) in dist.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                r -= d;
                if r <= 0.0 {
                    idx = Some(i);
                    break;
                }
            }
            // Float underflow in the prefix walk falls through to the last
            // weighted point.
            idx.unwrap_or_else(|| {
                dist.iter()
                    .rposition(|&d| d > 0.0)
                    .expect("total > 0 implies a weighted point")
            })
        } else {
            // All remaining points coincide with a centroid; take the first
            // unchosen one.
            (0..count)
                .find(|&i| !chosen[i])
                .expect("count >= k guarantees an unchosen point")
        };
        chosen[pick] = true;
        let start = centroids.len();
        centroids.extend_from_slice(point(data, dim, pick));
        let new = &centroids[start..start + dim];
        for (i, d) in dist.iter_mut().enumerate() {
            let nd = (1.0 - crate::embedding::dot(point(data, dim, i), new)).max(0.0);
            if nd < *d {
                *d = nd;
            }
        }
        dist[pick] = 0.0;
    }
    centroids
}

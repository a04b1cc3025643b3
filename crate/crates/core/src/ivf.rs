//! Inverted-file index over quantized embeddings.
//!
//! Vectors are partitioned into `nlist` Voronoi cells by spherical k-means;
//! each cell holds a posting list of `(term id, quantized code)` entries.
//! A search ranks cells by centroid cosine, scans the best `nprobe` posting
//! lists, and scores candidates against their decoded vectors, so results
//! with `nprobe = nlist` are exactly the brute-force answer over the
//! decoded (not original) vectors.
//!
//! On-disk layout, all little-endian: magic `LXIVF1`; `nlist`, `dim`,
//! `count` as `u32`; centroid floats; codec min/max floats; per-cell entry
//! counts; then per-cell payloads (ids, then codes).

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kmeans;
use crate::quant::{RangeMode, Sq8Codec};
use crate::types::{ScoredCandidate, TermId};

pub const INDEX_MAGIC: &[u8; 6] = b"LXIVF1";

/// Default cell count: `ceil(4 * sqrt(count))`, clamped to the vector count
/// so tiny inputs stay trainable.
pub fn default_nlist(count: usize) -> u32 {
    let raw = (4.0 * (count as f64).sqrt()).ceil() as usize;
    raw.clamp(1, count.max(1)) as u32
}

#[derive(Debug, Clone)]
pub struct IvfBuildParams {
    /// Cell count; `None` selects [`default_nlist`].
    pub nlist: Option<u32>,
    pub kmeans_iters: usize,
    pub seed: u64,
    pub range_mode: RangeMode,
}

impl Default for IvfBuildParams {
    fn default() -> Self {
        IvfBuildParams {
            nlist: None,
            kmeans_iters: 20,
            seed: 42,
            range_mode: RangeMode::PerDimension,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    pub top_k: usize,
    /// Cells to probe; clamped to `[1, nlist]`.
    pub nprobe: u32,
    /// Results must score strictly above this cosine.
    pub sim_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub id: TermId,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Posting {
    ids: Vec<TermId>,
    codes: Vec<u8>,
}

/// Coarse centroids plus one quantized posting list per cell. Every indexed
/// vector lives in exactly one posting list: the cell whose centroid has the
/// highest cosine to it.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: u32,
    count: u32,
    centroids: Vec<f32>,
    codec: Sq8Codec,
    postings: Vec<Posting>,
}

impl IvfIndex {
    pub fn build(matrix: &EmbeddingMatrix, params: &IvfBuildParams) -> Result<Self> {
        let count = matrix.count();
        let dim = matrix.dim();
        if count == 0 {
            return Err(Error::SampleTooSmall {
                sample: 0,
                nlist: params.nlist.unwrap_or(1) as usize,
            });
        }
        let nlist = match params.nlist {
            Some(n) => n,
            None => default_nlist(count),
        } as usize;
        if nlist == 0 || nlist > count {
            return Err(Error::SampleTooSmall {
                sample: count,
                nlist,
            });
        }

        let codec = Sq8Codec::train(matrix, params.range_mode);
        let data: Vec<f32> = matrix.rows().flatten().copied().collect();
        let centroids = kmeans::train(&data, dim, nlist, params.kmeans_iters, params.seed)?;

        let cells: Vec<u32> = (0..count)
            .into_par_iter()
            .map(|i| kmeans::nearest_centroid(matrix.row(i as TermId), &centroids, dim).0)
            .collect();

        let mut postings = vec![Posting::default(); nlist];
        let mut code = vec![0u8; dim];
        for (i, &cell) in cells.iter().enumerate() {
            let p = &mut postings[cell as usize];
            p.ids.push(i as TermId);
            codec.encode_into(matrix.row(i as TermId), &mut code);
            p.codes.extend_from_slice(&code);
        }

        Ok(IvfIndex {
            dim: dim as u32,
            count: count as u32,
            centroids,
            codec,
            postings,
        })
    }

    pub fn nlist(&self) -> u32 {
        self.postings.len() as u32
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn codec(&self) -> &Sq8Codec {
        &self.codec
    }

    /// Posting sizes per cell, in cell order. Sums to `count`.
    pub fn cell_sizes(&self) -> Vec<usize> {
        self.postings.iter().map(|p| p.ids.len()).collect()
    }

    /// Term ids stored in one cell.
    pub fn cell_ids(&self, cell: u32) -> &[TermId] {
        &self.postings[cell as usize].ids
    }

    /// Decoded vector for one indexed term, as search scores it.
    pub fn decoded(&self, id: TermId) -> Option<Vec<f32>> {
        let dim = self.dim();
        for p in &self.postings {
            if let Ok(pos) = p.ids.binary_search(&id) {
                return Some(self.codec.decode(&p.codes[pos * dim..(pos + 1) * dim]));
            }
        }
        None
    }

    /// Scans the `nprobe` cells nearest to `query` and returns hits with
    /// decoded-vector cosine strictly above the threshold, best first, ties
    /// on the lower term id, at most `top_k` of them.
    pub fn search(&self, query: &[f32], params: &SearchParams) -> Result<Vec<SearchHit>> {
        let dim = self.dim();
        if query.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: query.len(),
            });
        }
        let qnorm = query
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt();
        if qnorm == 0.0 {
            return Err(Error::ZeroNormQuery);
        }
        let nlist = self.postings.len();
        let nprobe = (params.nprobe as usize).clamp(1, nlist);

        let mut cells: Vec<(u32, f64)> = (0..nlist)
            .map(|c| {
                let d = crate::embedding::dot(query, &self.centroids[c * dim..(c + 1) * dim]);
                (c as u32, d)
            })
            .collect();
        cells.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        cells.truncate(nprobe);

        let mut hits = Vec::new();
        let mut decoded = vec![0f32; dim];
        for &(cell, _) in &cells {
            let p = &self.postings[cell as usize];
            for (pos, &id) in p.ids.iter().enumerate() {
                self.codec
                    .decode_into(&p.codes[pos * dim..(pos + 1) * dim], &mut decoded);
                let mut num = 0f64;
                let mut dn = 0f64;
                for (&q, &d) in query.iter().zip(&decoded) {
                    num += q as f64 * d as f64;
                    dn += d as f64 * d as f64;
                }
                if dn == 0.0 {
                    continue;
                }
                let cosine = num / (qnorm * dn.sqrt());
                if cosine > params.sim_threshold {
                    hits.push(SearchHit { id, cosine });
                }
            }
        }
        hits.sort_by(|x, y| y.cosine.total_cmp(&x.cosine).then(x.id.cmp(&y.id)));
        hits.truncate(params.top_k);
        Ok(hits)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let dim = self.dim();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let io = |e| Error::io(path, e);
        f.write_all(INDEX_MAGIC).map_err(io)?;
        f.write_u32::<LittleEndian>(self.nlist()).map_err(io)?;
        f.write_u32::<LittleEndian>(self.dim).map_err(io)?;
        f.write_u32::<LittleEndian>(self.count).map_err(io)?;
        let mut buf = vec![0u8; self.centroids.len() * 4];
        LittleEndian::write_f32_into(&self.centroids, &mut buf);
        f.write_all(&buf).map_err(io)?;
        let mut ranges = vec![0u8; dim * 4];
        LittleEndian::write_f32_into(self.codec.mins(), &mut ranges);
        f.write_all(&ranges).map_err(io)?;
        LittleEndian::write_f32_into(self.codec.maxs(), &mut ranges);
        f.write_all(&ranges).map_err(io)?;
        for p in &self.postings {
            f.write_u32::<LittleEndian>(p.ids.len() as u32).map_err(io)?;
        }
        for p in &self.postings {
            let mut ids = vec![0u8; p.ids.len() * 4];
            LittleEndian::write_u32_into(&p.ids, &mut ids);
            f.write_all(&ids).map_err(io)?;
            f.write_all(&p.codes).map_err(io)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 6];
        f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != INDEX_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: "LXIVF1",
            });
        }
        let nlist = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
        let dim = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
        let count = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))?;
        if nlist == 0 || dim == 0 {
            return Err(Error::parse(path, 0, "empty geometry in header"));
        }
        let read_f32s = |f: &mut fs::File, n: usize| -> Result<Vec<f32>> {
            let mut bytes = vec![0u8; n * 4];
            f.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
            let mut out = vec![0f32; n];
            LittleEndian::read_f32_into(&bytes, &mut out);
            Ok(out)
        };
        let centroids = read_f32s(&mut f, nlist * dim)?;
        let mins = read_f32s(&mut f, dim)?;
        let maxs = read_f32s(&mut f, dim)?;
        let mut sizes = vec![0u32; nlist];
        for s in sizes.iter_mut() {
            *s = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))?;
        }
        if sizes.iter().map(|&s| s as u64).sum::<u64>() != count as u64 {
            return Err(Error::parse(path, 0, "posting sizes do not sum to count"));
        }
        let mut postings = Vec::with_capacity(nlist);
        for &s in &sizes {
            let n = s as usize;
            let mut id_bytes = vec![0u8; n * 4];
            f.read_exact(&mut id_bytes).map_err(|e| Error::io(path, e))?;
            let mut ids = vec![0u32; n];
            LittleEndian::read_u32_into(&id_bytes, &mut ids);
            let mut codes = vec![0u8; n * dim];
            f.read_exact(&mut codes).map_err(|e| Error::io(path, e))?;
            postings.push(Posting { ids, codes });
        }
        let mut trailing = [0u8; 1];
        if f.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::parse(path, 0, "trailing bytes after postings"));
        }
        Ok(IvfIndex {
            dim: dim as u32,
            count,
            centroids,
            codec: Sq8Codec::from_ranges(mins, maxs),
            postings,
        })
    }
}

/// Queries the index with every full-precision row of `matrix` and merges
/// the per-query hits into deduplicated, canonically ordered pairs. A pair
/// found from both directions keeps the higher cosine. Queries are sharded
/// across threads; the merge runs in query order, so output is independent
/// of thread count.
pub fn generate_candidates(
    index: &IvfIndex,
    matrix: &EmbeddingMatrix,
    params: &SearchParams,
) -> Result<Vec<ScoredCandidate>> {
    if matrix.count() != index.count() {
        return Err(Error::CountMismatch {
            expected: index.count(),
            found: matrix.count(),
        });
    }
    let per_query: Vec<Vec<SearchHit>> = (0..matrix.count())
        .into_par_iter()
        .map(|i| index.search(matrix.row(i as TermId), params))
        .collect::<Result<_>>()?;

    let mut best: BTreeMap<(TermId, TermId), f64> = BTreeMap::new();
    for (i, hits) in per_query.iter().enumerate() {
        let q = i as TermId;
        for hit in hits {
            if hit.id == q {
                continue;
            }
            let key = if q < hit.id { (q, hit.id) } else { (hit.id, q) };
            let e = best.entry(key).or_insert(f64::NEG_INFINITY);
            if hit.cosine > *e {
                *e = hit.cosine;
            }
        }
    }
    Ok(best
        .into_iter()
        .map(|((a, b), cosine)| ScoredCandidate { a, b, cosine })
        .collect())
}

/// Writes candidates as TSV rows `a_id\tb_id\tcosine` with six decimal
/// places.
pub fn write_candidates(path: &Path, candidates: &[ScoredCandidate]) -> Result<()> {
    let mut out = String::new();
    for c in candidates {
        out.push_str(&format!("{}\t{}\t{:.6}\n", c.a, c.b, c.cosine));
    }
    crate::types::write_text(path, &out)
}

/// Reads a candidate TSV, enforcing canonical order: `a < b` per row and
/// rows strictly ascending by `(a, b)`.
pub fn read_candidates(path: &Path) -> Result<Vec<ScoredCandidate>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut prev: Option<(TermId, TermId)> = None;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let mut parts = line.split('\t');
        let (a, b, cos) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => return Err(Error::parse(path, ln, "expected 3 tab-separated columns")),
        };
        let a: TermId = a
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad term id"))?;
        let b: TermId = b
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad term id"))?;
        let cosine: f64 = cos
            .parse()
            .map_err(|_| Error::parse(path, ln, "bad cosine"))?;
        if a >= b {
            return Err(Error::parse(path, ln, "pair not in canonical order"));
        }
        if let Some(p) = prev {
            if (a, b) <= p {
                return Err(Error::parse(path, ln, "rows not strictly ascending"));
            }
        }
        prev = Some((a, b));
        out.push(ScoredCandidate { a, b, cosine });
    }
    Ok(out)
}

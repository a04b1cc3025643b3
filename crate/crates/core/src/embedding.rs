//! Embedding matrix storage.
//!
//! On-disk layout, all little-endian: the magic `LXEMB1`, a `u32` row count,
//! a `u32` dimension, then `count * dim` `f32` values row-major. Rows are
//! L2-renormalized on load so the rest of the pipeline can treat every row
//! as a unit vector; a row of zeros cannot be normalized and is rejected.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::types::TermId;

pub const EMBEDDING_MAGIC: &[u8; 6] = b"LXEMB1";

/// Row-major f32 matrix with one unit-normalized row per term id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from rows, normalizing each to unit L2 norm.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let mut m = EmbeddingMatrix { dim, data };
        m.normalize_rows()?;
        Ok(m)
    }

    /// Reads a matrix file. When `expected_count` is given, the header row
    /// count must match it; the pipeline passes the term table size here so
    /// ids index both structures consistently.
    pub fn load(path: &Path, expected_count: Option<usize>) -> Result<Self> {
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 6];
        f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: "LXEMB1",
            });
        }
        let count = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
        let dim = f.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
        if let Some(expected) = expected_count {
            if count != expected {
                return Err(Error::CountMismatch {
                    expected,
                    found: count,
                });
            }
        }
        if count > 0 && dim == 0 {
            return Err(Error::parse(path, 0, "zero dimension with nonzero count"));
        }
        let len = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::parse(path, 0, "matrix dimensions overflow"))?;
        let mut bytes = vec![0u8; len];
        f.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        let mut trailing = [0u8; 1];
        if f.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::parse(path, 0, "trailing bytes after matrix payload"));
        }
        let mut data = vec![0f32; count * dim];
        LittleEndian::read_f32_into(&bytes, &mut data);
        let mut m = EmbeddingMatrix { dim, data };
        m.normalize_rows()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(EMBEDDING_MAGIC).map_err(|e| Error::io(path, e))?;
        f.write_u32::<LittleEndian>(self.count() as u32)
            .map_err(|e| Error::io(path, e))?;
        f.write_u32::<LittleEndian>(self.dim as u32)
            .map_err(|e| Error::io(path, e))?;
        let mut bytes = vec![0u8; self.data.len() * 4];
        LittleEndian::write_f32_into(&self.data, &mut bytes);
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    fn normalize_rows(&mut self) -> Result<()> {
        if self.dim == 0 {
            return Ok(());
        }
        for (i, row) in self.data.chunks_exact_mut(self.dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteRow { row: i });
            }
            let norm = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row: i });
            }
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: TermId) -> &[f32] {
        let i = id as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get_row(&self, id: TermId) -> Option<&[f32]> {
        let i = id as usize;
        if i < self.count() {
            Some(self.row(id))
        } else {
            None
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// Cosine similarity with f64 accumulation. Callers pass slices of equal
/// length; zero-norm inputs yield 0 rather than NaN.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Dot product with f64 accumulation, for unit vectors where the norms are
/// already known to be 1.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

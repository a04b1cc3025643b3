//! 8-bit scalar quantization of embedding components.
//!
//! Each component is mapped onto 127 levels inside a trained value range:
//! `q = floor(127 * (v - min) / (max - min))`, clamped to `[0, 127]`.
//! Decoding reconstructs the midpoint of the level, `min + (q + 0.5) / 127 *
//! (max - min)`, which bounds the per-component round-trip error by
//! `(max - min) / 127` for any in-range value.
//!
//! Ranges are trained per dimension by default, which tightens the error
//! bound on anisotropic data; [`RangeMode::Global`] trains one shared range
//! over all components instead.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;

const LEVELS: f32 = 127.0;

/// How value ranges are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeMode {
    /// One `(min, max)` per dimension.
    PerDimension,
    /// A single `(min, max)` shared by every dimension.
    Global,
}

/// Trained scalar quantizer: one value range per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Sq8Codec {
    mins: Vec<f32>,
    maxs: Vec<f32>,
}

impl Sq8Codec {
    /// Trains ranges over every row of the matrix.
    pub fn train(matrix: &EmbeddingMatrix, mode: RangeMode) -> Self {
        let dim = matrix.dim();
        let mut mins = vec![f32::INFINITY; dim];
        let mut maxs = vec![f32::NEG_INFINITY; dim];
        for row in matrix.rows() {
            for (d, &v) in row.iter().enumerate() {
                mins[d] = mins[d].min(v);
                maxs[d] = maxs[d].max(v);
            }
        }
        if matrix.count() == 0 {
            mins.iter_mut().for_each(|v| *v = 0.0);
            maxs.iter_mut().for_each(|v| *v = 0.0);
        }
        if mode == RangeMode::Global && dim > 0 {
            let lo = mins.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = maxs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            mins.iter_mut().for_each(|v| *v = lo);
            maxs.iter_mut().for_each(|v| *v = hi);
        }
        Sq8Codec { mins, maxs }
    }

    /// Builds a codec from explicit ranges. Callers must keep `min <= max`
    /// per dimension.
    pub fn from_ranges(mins: Vec<f32>, maxs: Vec<f32>) -> Self {
        assert_eq!(mins.len(), maxs.len());
        debug_assert!(mins.iter().zip(&maxs).all(|(lo, hi)| lo <= hi));
        Sq8Codec { mins, maxs }
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f32] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f32] {
        &self.maxs
    }

    /// Worst-case round-trip error for dimension `d`.
    pub fn step(&self, d: usize) -> f32 {
        (self.maxs[d] - self.mins[d]) / LEVELS
    }

    pub fn encode_into(&self, v: &[f32], out: &mut [u8]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for d in 0..v.len() {
            let (lo, hi) = (self.mins[d], self.maxs[d]);
            out[d] = if hi <= lo {
                0
            } else if v[d] >= hi {
                // Guarded separately: the scaled quotient can round to just
                // under 127 for spans whose scaling is inexact in f32, and
                // the top of the range must always hit the last code.
                127
            } else {
                let t = LEVELS * (v[d] - lo) / (hi - lo);
                t.floor().clamp(0.0, 127.0) as u8
            };
        }
    }

    pub fn encode(&self, v: &[f32]) -> Vec<u8> {
        let mut out = vec![0u8; self.dim()];
        self.encode_into(v, &mut out);
        out
    }

    /// Midpoint reconstruction. Codes above 127 cannot be produced by
    /// [`encode`](Self::encode) and are clamped down defensively.
    pub fn decode_into(&self, code: &[u8], out: &mut [f32]) {
        debug_assert_eq!(code.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for d in 0..code.len() {
            let (lo, hi) = (self.mins[d], self.maxs[d]);
            out[d] = if hi <= lo {
                lo
            } else {
                lo + (code[d].min(127) as f32 + 0.5) / LEVELS * (hi - lo)
            };
        }
    }

    pub fn decode(&self, code: &[u8]) -> Vec<f32> {
        let mut out = vec![0f32; self.dim()];
        self.decode_into(code, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_codec() -> Sq8Codec {
        Sq8Codec::from_ranges(vec![0.0], vec![1.0])
    }

    #[test]
    fn midscale_encodes_to_63() {
        // floor(127 * 0.5) = floor(63.5) = 63.
        assert_eq!(unit_codec().encode(&[0.5]), vec![63]);
    }

    #[test]
    fn range_top_encodes_to_127_even_on_awkward_spans() {
        // Spans whose scaling is inexact in f32 used to floor the top of
        // the range down to 126.
        for &(lo, hi) in &[(0.1f32, 0.3f32), (-8.0, 7.77), (1e-3, 2e-3)] {
            let c = Sq8Codec::from_ranges(vec![lo], vec![hi]);
            assert_eq!(c.encode(&[hi]), vec![127], "span ({lo}, {hi})");
            assert_eq!(c.encode(&[lo]), vec![0], "span ({lo}, {hi})");
        }
    }

    #[test]
    fn code_zero_decodes_to_first_midpoint() {
        // Midpoint of level 0 on [0, 1]: 0.5 / 127.
        let expected = 0.5f32 / 127.0;
        assert_relative_eq!(unit_codec().decode(&[0])[0], expected, epsilon = 1e-9);
        assert_relative_eq!(expected, 0.003_937_007_9, epsilon = 1e-8);
    }

    #[test]
    fn out_of_range_values_clamp_to_endpoint_codes() {
        let c = unit_codec();
        assert_eq!(c.encode(&[-0.25]), vec![0]);
        assert_eq!(c.encode(&[1.25]), vec![127]);
    }

    #[test]
    fn range_endpoints_map_to_codes_0_and_127() {
        let c = Sq8Codec::from_ranges(vec![-0.3, 2.0], vec![0.9, 7.5]);
        assert_eq!(c.encode(&[-0.3, 2.0]), vec![0, 0]);
        assert_eq!(c.encode(&[0.9, 7.5]), vec![127, 127]);
    }

    #[test]
    fn degenerate_dimension_encodes_zero_and_decodes_min() {
        let c = Sq8Codec::from_ranges(vec![0.7], vec![0.7]);
        assert_eq!(c.encode(&[0.7]), vec![0]);
        assert_eq!(c.decode(&[0])[0], 0.7);
        assert_eq!(c.decode(&[9])[0], 0.7);
    }

    #[test]
    fn round_trip_error_is_within_one_step() {
        let c = Sq8Codec::from_ranges(vec![-1.0], vec![1.0]);
        let step = c.step(0);
        let mut v = -1.0f32;
        while v <= 1.0 {
            let back = c.decode(&c.encode(&[v]))[0];
            assert!(
                (back - v).abs() <= step,
                "v={v} back={back} step={step}"
            );
            v += 0.001;
        }
    }

    #[test]
    fn decode_is_finite_for_every_byte() {
        let c = Sq8Codec::from_ranges(vec![-2.5], vec![3.5]);
        for b in 0..=255u8 {
            assert!(c.decode(&[b])[0].is_finite());
        }
    }

    #[test]
    fn global_mode_shares_one_range() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let per = Sq8Codec::train(&m, RangeMode::PerDimension);
        let global = Sq8Codec::train(&m, RangeMode::Global);
        assert_eq!(per.mins(), &[0.0, -1.0]);
        assert_eq!(per.maxs(), &[1.0, 0.0]);
        assert_eq!(global.mins(), &[-1.0, -1.0]);
        assert_eq!(global.maxs(), &[1.0, 1.0]);
    }

    #[test]
    fn training_covers_every_row() {
        let m = EmbeddingMatrix::from_rows(&[vec![3.0, 4.0], vec![-4.0, 3.0]]).unwrap();
        let c = Sq8Codec::train(&m, RangeMode::PerDimension);
        for row in m.rows() {
            let code = c.encode(row);
            let back = c.decode(&code);
            for d in 0..2 {
                assert!((back[d] - row[d]).abs() <= c.step(d));
            }
        }
    }
}

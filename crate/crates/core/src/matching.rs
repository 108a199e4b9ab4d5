//! Cosine nearest-neighbour pairing of source frames with target frames.
//!
//! The search is an exhaustive scan. Squared norms are precomputed with the same
//! summation order [`cosine_distance`] uses, so results are bit-identical to
//! calling it on every pair and picking the `k` smallest with ties going to
//! the lowest target index.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::FeatureMatrix;

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPairs {
    /// Neighbours per source frame.
    pub k: usize,
    pub source_indices: Vec<usize>,
    pub target_indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl MatchedPairs {
    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }

    pub fn n_sources(&self) -> usize {
        self.len() / self.k.max(1)
    }

    /// Target indices matched to source frame `i`, nearest first.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.target_indices[i * self.k..(i + 1) * self.k]
    }

    /// Export as an `L×3` matrix of (source index, target index, distance).
    ///
    /// Indices are exact in `f32` only up to 2^24; larger ones are rejected.
    pub fn to_matrix(&self) -> Result<FeatureMatrix> {
        const F32_EXACT: usize = 1 << 24;
        let mut values = Vec::with_capacity(self.len() * 3);
        for n in 0..self.len() {
            let (s, t) = (self.source_indices[n], self.target_indices[n]);
            if s > F32_EXACT || t > F32_EXACT {
                return Err(Error::Parameter(format!(
                    "frame index {} is not exactly representable in the export",
                    s.max(t)
                )));
            }
            values.extend([s as f64, t as f64, self.distances[n]]);
        }
        FeatureMatrix::from_row_slice(self.len(), 3, &values)
    }

    /// Inverse of [`MatchedPairs::to_matrix`]. `k` is inferred from the
    /// number of leading rows sharing source index 0.
    pub fn from_matrix(m: &FeatureMatrix) -> Result<Self> {
        if m.cols() != 3 {
            return Err(Error::Shape(format!(
                "pair export needs 3 columns, got {}",
                m.cols()
            )));
        }
        let index = |v: f64| -> Result<usize> {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parameter(format!("{v} is not a frame index")));
            }
            Ok(v as usize)
        };
        let mut pairs = MatchedPairs {
            k: 0,
            source_indices: Vec::with_capacity(m.rows()),
            target_indices: Vec::with_capacity(m.rows()),
            distances: Vec::with_capacity(m.rows()),
        };
        for i in 0..m.rows() {
            pairs.source_indices.push(index(m[(i, 0)])?);
            pairs.target_indices.push(index(m[(i, 1)])?);
            pairs.distances.push(m[(i, 2)]);
        }
        let first = pairs.source_indices[0];
        pairs.k = pairs
            .source_indices
            .iter()
            .take_while(|&&s| s == first)
            .count();
        if pairs.len() % pairs.k != 0 {
            return Err(Error::Internal(
                "pair rows are not grouped in equal-sized blocks".into(),
            ));
        }
        Ok(pairs)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Takes squared norms; `sqrt(‖a‖²‖b‖²)` makes a self-distance exactly zero.
#[inline]
fn distance_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a < ZERO_NORM * ZERO_NORM || sq_b < ZERO_NORM * ZERO_NORM {
        return 1.0;
    }
    let mut denom = (sq_a * sq_b).sqrt();
    if !denom.is_finite() {
        denom = sq_a.sqrt() * sq_b.sqrt();
    }
    (1.0 - dot / denom).clamp(0.0, 2.0)
}

/// `1 − a·b / (‖a‖‖b‖)`, clamped to `[0, 2]`. Returns `1.0` when either
/// vector is (numerically) zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(distance_from_parts(dot(a, b), dot(a, a), dot(b, b)))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// For each source row, the `k` cosine-nearest target rows (ascending by
/// distance, ties to the lowest index).
pub fn match_frames(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    k: usize,
) -> Result<MatchedPairs> {
    if source.cols() != target.cols() {
        return Err(Error::Shape(format!(
            "source has {} columns, target has {}",
            source.cols(),
            target.cols()
        )));
    }
    if k == 0 || k > target.rows() {
        return Err(Error::Parameter(format!(
            "neighbour count {k} outside 1..={}",
            target.rows()
        )));
    }
    let d = source.cols();
    let src = row_major(source);
    let tgt = row_major(target);
    let tgt_sq: Vec<f64> = tgt.chunks_exact(d).map(|r| dot(r, r)).collect();

    let per_row: Vec<Vec<(f64, usize)>> = src
        .par_chunks_exact(d)
        .map(|a| {
            let sq_a = dot(a, a);
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (j, b) in tgt.chunks_exact(d).enumerate() {
                let dist = distance_from_parts(dot(a, b), sq_a, tgt_sq[j]);
                // strict comparison keeps the earlier index on ties
                if best.len() == k && dist >= best[k - 1].0 {
                    continue;
                }
                let at = best.partition_point(|&(bd, _)| bd <= dist);
                best.insert(at, (dist, j));
                best.truncate(k);
            }
            best
        })
        .collect();

    let n = source.rows();
    let mut pairs = MatchedPairs {
        k,
        source_indices: Vec::with_capacity(n * k),
        target_indices: Vec::with_capacity(n * k),
        distances: Vec::with_capacity(n * k),
    };
    for (i, best) in per_row.into_iter().enumerate() {
        for (dist, j) in best {
            pairs.source_indices.push(i);
            pairs.target_indices.push(j);
            pairs.distances.push(dist);
        }
    }
    Ok(pairs)
}

/// Row `i` of the result is the mean of the `k` target rows matched to
/// source frame `i`.
pub fn gather_targets(
    pairs: &MatchedPairs,
    target: &FeatureMatrix,
    k: usize,
) -> Result<FeatureMatrix> {
    if k == 0 || pairs.k != k || pairs.len() % k != 0 || pairs.is_empty() {
        return Err(Error::Internal(format!(
            "pairs hold {} entries with k = {}, asked to pool {k}",
            pairs.len(),
            pairs.k
        )));
    }
    if let Some(&bad) = pairs.target_indices.iter().find(|&&j| j >= target.rows()) {
        return Err(Error::Internal(format!(
            "target index {bad} out of range for {} rows",
            target.rows()
        )));
    }
    let n = pairs.n_sources();
    let mut out = DMatrix::<f64>::zeros(n, target.cols());
    for i in 0..n {
        let idx = pairs.neighbours(i);
        if k == 1 {
            out.row_mut(i).copy_from(&target.row(idx[0]));
            continue;
        }
        let mut acc = target.row(idx[0]).into_owned();
        for &j in &idx[1..] {
            acc += target.row(j);
        }
        out.row_mut(i).copy_from(&(acc / k as f64));
    }
    FeatureMatrix::new(out)
}

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An N×D matrix of per-frame features.
///
/// Values are held in `f64` regardless of the on-disk precision. Every entry
/// is finite and both dimensions are at least one; the constructors enforce
/// this and the type offers no mutable access afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::Shape(format!(
                "feature matrix must be non-empty, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if let Some((idx, _)) = inner.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let (row, col) = (idx % inner.nrows(), idx / inner.nrows());
            return Err(Error::NonFinite { row, col });
        }
        Ok(FeatureMatrix(inner))
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    /// Copies the values out in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter());
        }
        out
    }

    pub fn column_mean(&self) -> DVector<f64> {
        self.0.row_mean().transpose()
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::Parameter(format!(
                "row index {bad} out of range for {} rows",
                self.rows()
            )));
        }
        Self::new(self.0.select_rows(indices))
    }

    /// Horizontal concatenation `[a | b | ...]`.
    pub fn hstack(blocks: &[&FeatureMatrix]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Parameter("nothing to concatenate".into()))?;
        let rows = first.rows();
        if let Some(b) = blocks.iter().find(|b| b.rows() != rows) {
            return Err(Error::Shape(format!(
                "cannot concatenate blocks with {} and {} rows",
                rows,
                b.rows()
            )));
        }
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.cols()).copy_from(b.as_matrix());
            at += b.cols();
        }
        Ok(FeatureMatrix(out))
    }
}

impl Deref for FeatureMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<DMatrix<f64>> for FeatureMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        FeatureMatrix::new(m)
    }
}

//! Dense decompositions shared by every fitting routine.
//!
//! All routines run in `f64` and go through one thin SVD, so rank-deficient
//! inputs get minimum-norm answers instead of blowing up.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Thin SVD truncated to `k` components: `a ≈ u · diag(sigma) · vt`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// N×k, orthonormal columns.
    pub u: DMatrix<f64>,
    /// k values, non-negative, descending.
    pub sigma: Vec<f64>,
    /// k×D, orthonormal rows.
    pub vt: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank_limit(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` components.
    pub fn truncate(&self, k: usize) -> Result<SvdResult> {
        if k == 0 || k > self.sigma.len() {
            return Err(Error::Parameter(format!(
                "truncation rank {k} outside 1..={}",
                self.sigma.len()
            )));
        }
        Ok(SvdResult {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma[..k].to_vec(),
            vt: self.vt.rows(0, k).into_owned(),
        })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.vt
    }

    /// Number of singular values above `rcond · σ_max`.
    pub fn numerical_rank(&self, rcond: f64) -> usize {
        let cutoff = rcond * self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }
}

/// `max(rows, cols) · ε`, the default relative cutoff for rank decisions.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

fn full_svd(a: &DMatrix<f64>) -> Result<SvdResult> {
    if a.is_empty() {
        return Err(Error::Shape("cannot decompose an empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix contains non-finite values".into()));
    }
    let svd =
        SVD::try_new(a.clone(), true, true, f64::EPSILON * 5.0, 0).ok_or(Error::SvdConvergence)?;
    let u = svd.u.ok_or(Error::SvdConvergence)?;
    let vt = svd.v_t.ok_or(Error::SvdConvergence)?;
    Ok(SvdResult {
        u,
        sigma: svd.singular_values.iter().map(|s| s.max(0.0)).collect(),
        vt,
    })
}

/// Rank-`k` truncated SVD. The retained values are the `k` largest.
pub fn svd(a: &DMatrix<f64>, k: usize) -> Result<SvdResult> {
    let max_k = a.nrows().min(a.ncols());
    if k == 0 || k > max_k {
        return Err(Error::Parameter(format!(
            "rank limit {k} outside 1..={max_k}"
        )));
    }
    let full = full_svd(a)?;
    if k == max_k {
        Ok(full)
    } else {
        full.truncate(k)
    }
}

/// Thin SVD keeping all `min(rows, cols)` components.
pub fn svd_thin(a: &DMatrix<f64>) -> Result<SvdResult> {
    full_svd(a)
}

fn check_rcond(rcond: f64) -> Result<()> {
    if rcond.is_nan() || rcond < 0.0 {
        return Err(Error::Parameter(format!("rcond must be >= 0, got {rcond}")));
    }
    Ok(())
}

/// Spectral filter shared by `pinv`, `lstsq` and `ridge_solve`: maps each
/// singular value to its inverse weight, zeroing values at or below the cutoff.
fn filtered_inverse(sigma: &[f64], rcond: f64, ridge: f64) -> DVector<f64> {
    let cutoff = rcond * sigma.first().copied().unwrap_or(0.0);
    DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|&s| {
            if s > cutoff && s > 0.0 {
                s / (s * s + ridge)
            } else {
                0.0
            }
        }),
    )
}

/// Moore–Penrose pseudoinverse. Singular values at or below `rcond · σ_max`
/// are treated as zero.
pub fn pinv(a: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    check_rcond(rcond)?;
    let s = full_svd(a)?;
    let inv = filtered_inverse(&s.sigma, rcond, 0.0);
    // V · diag(inv) · Uᵀ
    let mut v = s.vt.transpose();
    for (j, w) in inv.iter().enumerate() {
        v.column_mut(j).scale_mut(*w);
    }
    Ok(v * s.u.transpose())
}

/// Minimum-norm least-squares solution of `min ‖y − x·w‖_F`, i.e. `w = x⁺·y`.
pub fn lstsq(x: &DMatrix<f64>, y: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    ridge_solve(x, y, 0.0, rcond)
}

/// Tikhonov-regularized least squares `min ‖y − x·w‖²_F + ridge·‖w‖²_F`.
/// With `ridge = 0` this is exactly [`lstsq`].
pub fn ridge_solve(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    ridge: f64,
    rcond: f64,
) -> Result<DMatrix<f64>> {
    check_rcond(rcond)?;
    if ridge.is_nan() || ridge < 0.0 {
        return Err(Error::Parameter(format!("ridge must be >= 0, got {ridge}")));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "x has {} rows but y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let s = full_svd(x)?;
    let inv = filtered_inverse(&s.sigma, rcond, ridge);
    let mut uty = s.u.transpose() * y;
    for (i, w) in inv.iter().enumerate() {
        uty.row_mut(i).scale_mut(*w);
    }
    Ok(s.vt.transpose() * uty)
}

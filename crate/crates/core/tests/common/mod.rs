#![allow(dead_code)]

use linearvc::FeatureMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn features(rng: &mut impl Rng, rows: usize, cols: usize) -> FeatureMatrix {
    FeatureMatrix::new(gaussian(rng, rows, cols)).unwrap()
}

/// Haar-ish random orthogonal matrix with the requested determinant sign.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize, det_sign: f64) -> DMatrix<f64> {
    let qr = gaussian(rng, d, d).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant().signum() != det_sign.signum() {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

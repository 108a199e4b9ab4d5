//! Linear voice-conversion maps `y ≈ x·W + b` under three constraint
//! families, plus the nearest-neighbour baseline and weight visualisation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matching::{gather_targets, match_frames};
use crate::tensor_io::{
    self, create_dir, default_rcond, read_matrix, write_atomic, write_matrix, FeatureMatrix,
    Manifest,
};

/// Default neighbour count of the kNN baseline converter.
pub const DEFAULT_KNN_K: usize = 4;
/// Default percentile of `|W|` used as the visualisation threshold.
pub const DEFAULT_VIZ_PERCENTILE: f64 = 99.0;
/// Default crop of the visualisation, in dimensions.
pub const DEFAULT_VIZ_DIMS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// Translation only; the weight is the identity.
    BiasOnly,
    /// Rotation/reflection (orthogonal Procrustes).
    Orthogonal,
    /// Any linear map (least squares).
    Unconstrained,
}

impl MapKind {
    pub const ALL: [MapKind; 3] = [
        MapKind::BiasOnly,
        MapKind::Orthogonal,
        MapKind::Unconstrained,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::BiasOnly => "bias_only",
            MapKind::Orthogonal => "orthogonal",
            MapKind::Unconstrained => "unconstrained",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" | "bias_only" | "bias-only" => Ok(MapKind::BiasOnly),
            "orthogonal" => Ok(MapKind::Orthogonal),
            "unconstrained" => Ok(MapKind::Unconstrained),
            _ => Err(Error::Parameter(format!("unknown map kind `{s}`"))),
        }
    }
}

/// A fitted map. `weight` is D×D and `bias` has length D.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    pub kind: MapKind,
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub with_bias: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Ridge penalty for the unconstrained family. Zero gives plain least squares.
    pub ridge: f64,
    /// Relative singular-value cutoff; `None` uses [`default_rcond`].
    pub rcond: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: 0.0,
            rcond: None,
        }
    }
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap {
            kind: MapKind::Unconstrained,
            weight: DMatrix::identity(dim, dim),
            bias: DVector::zeros(dim),
            with_bias: false,
        }
    }

    pub fn fitted_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// `‖WᵀW − I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.fitted_dim();
        (self.weight.transpose() * &self.weight - DMatrix::<f64>::identity(d, d)).norm()
    }

    /// `‖y − apply(x)‖²_F`.
    pub fn squared_error(&self, x: &FeatureMatrix, y: &FeatureMatrix) -> Result<f64> {
        let out = apply(self, x)?;
        if out.shape() != y.shape() {
            return Err(Error::Shape("prediction and target shapes differ".into()));
        }
        Ok((out.as_matrix() - y.as_matrix()).norm_squared())
    }

    /// Writes `weight.lvcf`, `bias.lvcf` and `manifest.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_matrix(
            &FeatureMatrix::new(self.weight.clone())?,
            dir.join("weight.lvcf"),
        )?;
        write_matrix(
            &FeatureMatrix::from_row_slice(1, self.bias.len(), self.bias.as_slice())?,
            dir.join("bias.lvcf"),
        )?;
        let mut m = Manifest::new();
        m.set("kind", self.kind)
            .set("fitted_dim", self.fitted_dim())
            .set("with_bias", self.with_bias);
        m.write(&dir.join("manifest.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let manifest = Manifest::read(&manifest_path)?;
        let kind: MapKind = manifest.require("kind", &manifest_path)?.parse()?;
        let dim: usize = manifest.require_parsed("fitted_dim", &manifest_path)?;
        let with_bias: bool = manifest.require_parsed("with_bias", &manifest_path)?;
        let weight = read_matrix(dir.join("weight.lvcf"))?.into_inner();
        let bias = read_matrix(dir.join("bias.lvcf"))?;
        if weight.shape() != (dim, dim) || bias.shape() != (1, dim) {
            return Err(Error::parse(
                dir,
                format!(
                    "expected {dim}x{dim} weight and 1x{dim} bias, found {:?} and {:?}",
                    weight.shape(),
                    bias.shape()
                ),
            ));
        }
        if kind == MapKind::BiasOnly && weight != DMatrix::identity(dim, dim) {
            return Err(Error::parse(dir, "bias-only map with non-identity weight"));
        }
        Ok(LinearMap {
            kind,
            weight,
            bias: bias.row(0).transpose(),
            with_bias,
        })
    }
}

fn check_pair(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<()> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::Shape(format!(
            "x is {}x{} but y is {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    Ok(())
}

fn centered(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

/// Orthogonal `W` minimising `‖y − x·W‖_F`: `U·Vᵀ` from the SVD of `xᵀy`.
///
/// When `xᵀy` has repeated or zero singular values the minimiser is not
/// unique; the one built from the computed SVD is returned.
pub fn procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cross = x.transpose() * y;
    let s = tensor_io::svd_thin(&cross)?;
    Ok(s.u * s.vt)
}

pub fn fit(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    kind: MapKind,
    with_bias: bool,
) -> Result<LinearMap> {
    fit_with(x, y, kind, with_bias, &FitOptions::default())
}

pub fn fit_with(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    kind: MapKind,
    with_bias: bool,
    opts: &FitOptions,
) -> Result<LinearMap> {
    check_pair(x, y)?;
    let d = x.cols();
    let mean_x = x.column_mean();
    let mean_y = y.column_mean();
    let (weight, bias) = match (kind, with_bias) {
        (MapKind::BiasOnly, _) => (DMatrix::identity(d, d), &mean_y - &mean_x),
        (MapKind::Orthogonal, false) => (procrustes(x, y)?, DVector::zeros(d)),
        (MapKind::Orthogonal, true) => {
            let w = procrustes(&centered(x, &mean_x), &centered(y, &mean_y))?;
            let b = &mean_y - w.transpose() * &mean_x;
            (w, b)
        }
        (MapKind::Unconstrained, false) => {
            let rcond = opts.rcond.unwrap_or_else(|| default_rcond(x.rows(), d));
            let w = tensor_io::ridge_solve(x, y, opts.ridge, rcond)?;
            (w, DVector::zeros(d))
        }
        (MapKind::Unconstrained, true) if opts.ridge > 0.0 => {
            // the intercept is not penalised
            let xc = centered(x, &mean_x);
            let yc = centered(y, &mean_y);
            let rcond = opts.rcond.unwrap_or_else(|| default_rcond(x.rows(), d));
            let w = tensor_io::ridge_solve(&xc, &yc, opts.ridge, rcond)?;
            let b = &mean_y - w.transpose() * &mean_x;
            (w, b)
        }
        (MapKind::Unconstrained, true) => {
            let mut aug = DMatrix::<f64>::from_element(x.rows(), d + 1, 1.0);
            aug.columns_mut(0, d).copy_from(x.as_matrix());
            let rcond = opts.rcond.unwrap_or_else(|| default_rcond(x.rows(), d + 1));
            let wb = tensor_io::ridge_solve(&aug, y, opts.ridge, rcond)?;
            (wb.rows(0, d).into_owned(), wb.row(d).transpose())
        }
    };
    Ok(LinearMap {
        kind,
        weight,
        bias,
        with_bias: with_bias || kind == MapKind::BiasOnly,
    })
}

/// `x·W + 1·bᵀ`.
pub fn apply(map: &LinearMap, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.cols() != map.fitted_dim() {
        return Err(Error::Shape(format!(
            "input has {} columns, map expects {}",
            x.cols(),
            map.fitted_dim()
        )));
    }
    let mut out = if map.kind == MapKind::BiasOnly {
        x.as_matrix().clone()
    } else {
        x.as_matrix() * &map.weight
    };
    let bt = map.bias.transpose();
    for mut row in out.row_iter_mut() {
        row += &bt;
    }
    FeatureMatrix::new(out)
}

/// Replaces each source frame with the mean of its `k` cosine-nearest
/// frames in `target_pool`.
pub fn knn_convert(
    source: &FeatureMatrix,
    target_pool: &FeatureMatrix,
    k: usize,
) -> Result<FeatureMatrix> {
    let pairs = match_frames(source, target_pool, k)?;
    gather_targets(&pairs, target_pool, k)
}

/// A black-and-white raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` = set.
    pub pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    pub fn count_set(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Binary PGM (`P5`, maxval 255); set pixels are 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| if p { 255u8 } else { 0 }));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_pgm())
    }
}

/// Linear-interpolated percentile (`0..=100`) of `|weight|`.
pub fn weight_percentile(map: &LinearMap, percentile: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Parameter(format!(
            "percentile {percentile} outside 0..=100"
        )));
    }
    let mut mags: Vec<f64> = map.weight.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let pos = percentile / 100.0 * (mags.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(mags[lo] + (mags[hi] - mags[lo]) * (pos - lo as f64))
}

/// Pixel `(i, j)` is set iff `|W[i, j]| ≥ threshold`, over the leading
/// `max_dims` rows and columns.
pub fn export_viz(map: &LinearMap, threshold: f64, max_dims: usize) -> Result<BinaryImage> {
    if threshold.is_nan() {
        return Err(Error::Parameter("threshold is NaN".into()));
    }
    if max_dims == 0 || max_dims > map.fitted_dim() {
        return Err(Error::Parameter(format!(
            "max_dims {max_dims} outside 1..={}",
            map.fitted_dim()
        )));
    }
    let mut pixels = Vec::with_capacity(max_dims * max_dims);
    for i in 0..max_dims {
        for j in 0..max_dims {
            pixels.push(map.weight[(i, j)].abs() >= threshold);
        }
    }
    Ok(BinaryImage {
        width: max_dims,
        height: max_dims,
        pixels,
    })
}

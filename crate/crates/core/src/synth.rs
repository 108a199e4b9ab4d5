//! Planted multi-speaker feature datasets with known ground truth.
//!
//! Every speaker renders the same content: `n_frames` points drawn from
//! Gaussian class clusters in an `r_true`-dimensional content space. Speaker
//! `k` embeds them with its own map `T_k` (`r_true × d`) and bias `b_k`:
//!
//! ```text
//! X_k = P · T_k + 1·b_kᵀ + noise
//! ```
//!
//! All maps start from one shared orthonormal embedding `B`, rotated per
//! speaker by a random rotation whose size is set by `speaker_spread`. The
//! affine family additionally shears each map and adds a bias.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, stream)`: stream 0
//! is content, stream 1 the shared embedding, stream `2 + k` speaker `k`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matching::ZERO_NORM;
use crate::tensor_io::{create_dir, read_matrix, write_matrix, FeatureMatrix, Manifest};

/// Standard deviation of class centroids in content space.
pub const CENTROID_SCALE: f64 = 1.0;
/// Within-class standard deviation in content space.
pub const CLASS_SPREAD: f64 = 0.15;
/// Size of the non-orthogonal perturbation in the affine family.
pub const AFFINE_STRENGTH: f64 = 0.3;
/// Norm scale of per-speaker biases in the affine family.
pub const BIAS_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformFamily {
    /// Orthonormal-row maps, zero bias.
    Orthogonal,
    /// Sheared maps plus a bias.
    Affine,
}

impl fmt::Display for TransformFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformFamily::Orthogonal => "orthogonal",
            TransformFamily::Affine => "affine",
        })
    }
}

impl FromStr for TransformFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(TransformFamily::Orthogonal),
            "affine" => Ok(TransformFamily::Affine),
            _ => Err(Error::Parameter(format!("unknown transform family `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    /// Frames per speaker.
    pub n_frames: usize,
    pub d: usize,
    pub r_true: usize,
    pub k_speakers: usize,
    pub n_content_classes: usize,
    pub noise_sigma: f64,
    pub transform_family: TransformFamily,
    pub seed: u64,
    /// Scale of the per-speaker rotation away from the shared embedding.
    pub speaker_spread: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_frames: 2000,
            d: 64,
            r_true: 8,
            k_speakers: 4,
            n_content_classes: 20,
            noise_sigma: 0.01,
            transform_family: TransformFamily::Orthogonal,
            seed: 17,
            speaker_spread: 0.6,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n_frames == 0 || self.d == 0 || self.k_speakers == 0 {
            return bad("n_frames, d and k_speakers must be positive".into());
        }
        if self.r_true == 0 || self.r_true > self.d {
            return bad(format!("r_true {} outside 1..={}", self.r_true, self.d));
        }
        if self.n_content_classes < 2 {
            return bad("need at least 2 content classes".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma {} must be finite and >= 0",
                self.noise_sigma
            ));
        }
        if !(self.speaker_spread >= 0.0 && self.speaker_spread.is_finite()) {
            return bad(format!(
                "speaker_spread {} must be finite and >= 0",
                self.speaker_spread
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    /// N × r_true content coordinates, shared by all speakers.
    pub content_points: DMatrix<f64>,
    pub content_labels: Vec<usize>,
    /// n_classes × r_true.
    pub class_centroids: DMatrix<f64>,
    /// One r_true × d map per speaker.
    pub speaker_transforms: Vec<DMatrix<f64>>,
    pub speaker_biases: Vec<DVector<f64>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Cayley transform `(I − A/2)⁻¹(I + A/2)` of a random skew-symmetric `A`
/// with entries of size `spread / √d`.
fn random_rotation(rng: &mut impl Rng, d: usize, spread: f64) -> Result<DMatrix<f64>> {
    let g = gaussian(rng, d, d);
    let a = (&g - g.transpose()) * (0.5 * spread / (d as f64).sqrt());
    let eye = DMatrix::<f64>::identity(d, d);
    (&eye - &a * 0.5)
        .lu()
        .solve(&(&eye + &a * 0.5))
        .ok_or_else(|| Error::Internal("Cayley transform was singular".into()))
}

fn to_matrix(m: DMatrix<f64>) -> Result<FeatureMatrix> {
    FeatureMatrix::new(m)
}

/// Draws speaker matrices and the truth they were built from.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<FeatureMatrix>, SynthTruth)> {
    spec.validate()?;
    let (n, d, r, c) = (spec.n_frames, spec.d, spec.r_true, spec.n_content_classes);

    let mut rng = stream(spec.seed, 0);
    let class_centroids = gaussian(&mut rng, c, r) * CENTROID_SCALE;
    let content_labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let jitter = gaussian(&mut rng, n, r) * CLASS_SPREAD;
    let mut content_points = class_centroids.select_rows(&content_labels);
    content_points += jitter;

    let mut rng = stream(spec.seed, 1);
    let base = gaussian(&mut rng, d, r).qr().q().transpose();

    let per_speaker: Vec<(DMatrix<f64>, DVector<f64>, FeatureMatrix)> = (0..spec.k_speakers)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(spec.seed, 2 + k as u64);
            let mut transform = &base * random_rotation(&mut rng, d, spec.speaker_spread)?;
            let mut bias = DVector::zeros(d);
            if spec.transform_family == TransformFamily::Affine {
                let shear = gaussian(&mut rng, d, d) * (AFFINE_STRENGTH / (d as f64).sqrt());
                transform = &transform * (DMatrix::<f64>::identity(d, d) + shear);
                bias = DVector::from_fn(d, |_, _| {
                    rng.sample::<f64, _>(StandardNormal) * BIAS_SCALE / (d as f64).sqrt()
                });
            }
            let mut x = &content_points * &transform;
            for mut row in x.row_iter_mut() {
                row += bias.transpose();
            }
            if spec.noise_sigma > 0.0 {
                x += gaussian(&mut rng, n, d) * spec.noise_sigma;
            }
            Ok((transform, bias, to_matrix(x)?))
        })
        .collect::<Result<_>>()?;

    let mut mats = Vec::with_capacity(spec.k_speakers);
    let mut truth = SynthTruth {
        content_points,
        content_labels,
        class_centroids,
        speaker_transforms: Vec::with_capacity(spec.k_speakers),
        speaker_biases: Vec::with_capacity(spec.k_speakers),
    };
    for (t, b, x) in per_speaker {
        truth.speaker_transforms.push(t);
        truth.speaker_biases.push(b);
        mats.push(x);
    }
    Ok((mats, truth))
}

impl SynthTruth {
    pub fn n_frames(&self) -> usize {
        self.content_points.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.class_centroids.nrows()
    }

    pub fn k_speakers(&self) -> usize {
        self.speaker_transforms.len()
    }

    pub fn dim(&self) -> usize {
        self.speaker_transforms.first().map_or(0, |t| t.ncols())
    }

    fn check_speaker(&self, k: usize) -> Result<()> {
        if k >= self.k_speakers() {
            return Err(Error::Parameter(format!(
                "speaker {k} out of range for {} speakers",
                self.k_speakers()
            )));
        }
        Ok(())
    }

    fn embed(&self, points: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        let mut x = points * &self.speaker_transforms[k];
        for mut row in x.row_iter_mut() {
            row += self.speaker_biases[k].transpose();
        }
        x
    }

    /// Noiseless frames of speaker `k`.
    pub fn speaker_frames(&self, k: usize) -> Result<DMatrix<f64>> {
        self.check_speaker(k)?;
        Ok(self.embed(&self.content_points, k))
    }

    /// Class centroids rendered by speaker `k`, one row per class.
    pub fn speaker_centroids(&self, k: usize) -> Result<DMatrix<f64>> {
        self.check_speaker(k)?;
        Ok(self.embed(&self.class_centroids, k))
    }

    /// Truth restricted to the listed frames, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SynthTruth> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_frames()) {
            return Err(Error::Parameter(format!("frame {bad} out of range")));
        }
        Ok(SynthTruth {
            content_points: self.content_points.select_rows(rows),
            content_labels: rows.iter().map(|&i| self.content_labels[i]).collect(),
            class_centroids: self.class_centroids.clone(),
            speaker_transforms: self.speaker_transforms.clone(),
            speaker_biases: self.speaker_biases.clone(),
        })
    }

    /// Writes truth matrices and a manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let labels: Vec<f64> = self.content_labels.iter().map(|&l| l as f64).collect();
        write_matrix(
            &FeatureMatrix::from_row_slice(labels.len(), 1, &labels)?,
            dir.join("labels.lvcf"),
        )?;
        write_matrix(
            &to_matrix(self.content_points.clone())?,
            dir.join("content.lvcf"),
        )?;
        write_matrix(
            &to_matrix(self.class_centroids.clone())?,
            dir.join("centroids.lvcf"),
        )?;
        for k in 0..self.k_speakers() {
            write_matrix(
                &to_matrix(self.speaker_transforms[k].clone())?,
                dir.join(format!("transform_{k}.lvcf")),
            )?;
            let b = &self.speaker_biases[k];
            write_matrix(
                &FeatureMatrix::from_row_slice(1, b.len(), b.as_slice())?,
                dir.join(format!("bias_{k}.lvcf")),
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, k_speakers: usize) -> Result<SynthTruth> {
        let labels = read_matrix(dir.join("labels.lvcf"))?;
        let content_labels = (0..labels.rows())
            .map(|i| {
                let v = labels[(i, 0)];
                if v < 0.0 || v.fract() != 0.0 {
                    Err(Error::parse(dir, format!("bad label {v}")))
                } else {
                    Ok(v as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let class_centroids = read_matrix(dir.join("centroids.lvcf"))?.into_inner();
        if content_labels.iter().any(|&l| l >= class_centroids.nrows()) {
            return Err(Error::parse(dir, "label exceeds class count"));
        }
        let mut truth = SynthTruth {
            content_points: read_matrix(dir.join("content.lvcf"))?.into_inner(),
            content_labels,
            class_centroids,
            speaker_transforms: Vec::new(),
            speaker_biases: Vec::new(),
        };
        for k in 0..k_speakers {
            truth
                .speaker_transforms
                .push(read_matrix(dir.join(format!("transform_{k}.lvcf")))?.into_inner());
            truth.speaker_biases.push(
                read_matrix(dir.join(format!("bias_{k}.lvcf")))?
                    .row(0)
                    .transpose(),
            );
        }
        Ok(truth)
    }
}

/// Writes a generated dataset: `speaker_<k>.lvcf`, the truth files and
/// `manifest.txt` recording the spec.
pub fn write_dataset(
    dir: &Path,
    spec: &SynthSpec,
    mats: &[FeatureMatrix],
    truth: &SynthTruth,
) -> Result<()> {
    create_dir(dir)?;
    for (k, m) in mats.iter().enumerate() {
        write_matrix(m, dir.join(format!("speaker_{k}.lvcf")))?;
    }
    truth.save(dir)?;
    let mut man = Manifest::new();
    man.set("n_frames", spec.n_frames)
        .set("d", spec.d)
        .set("r_true", spec.r_true)
        .set("k_speakers", spec.k_speakers)
        .set("n_content_classes", spec.n_content_classes)
        .set("noise_sigma", spec.noise_sigma)
        .set("transform_family", spec.transform_family)
        .set("seed", spec.seed)
        .set("speaker_spread", spec.speaker_spread);
    man.write(&dir.join("manifest.txt"))
}

/// Reads back what [`write_dataset`] wrote.
pub fn read_dataset(dir: &Path) -> Result<(SynthSpec, Vec<FeatureMatrix>, SynthTruth)> {
    let mpath = dir.join("manifest.txt");
    let m = Manifest::read(&mpath)?;
    let spec = SynthSpec {
        n_frames: m.require_parsed("n_frames", &mpath)?,
        d: m.require_parsed("d", &mpath)?,
        r_true: m.require_parsed("r_true", &mpath)?,
        k_speakers: m.require_parsed("k_speakers", &mpath)?,
        n_content_classes: m.require_parsed("n_content_classes", &mpath)?,
        noise_sigma: m.require_parsed("noise_sigma", &mpath)?,
        transform_family: m.require("transform_family", &mpath)?.parse()?,
        seed: m.require_parsed("seed", &mpath)?,
        speaker_spread: m.require_parsed("speaker_spread", &mpath)?,
    };
    let mats = (0..spec.k_speakers)
        .map(|k| read_matrix(dir.join(format!("speaker_{k}.lvcf"))))
        .collect::<Result<Vec<_>>>()?;
    let truth = SynthTruth::load(dir, spec.k_speakers)?;
    Ok((spec, mats, truth))
}

fn check_converted(converted: &FeatureMatrix, truth: &SynthTruth, target: usize) -> Result<()> {
    truth.check_speaker(target)?;
    if converted.rows() != truth.n_frames() || converted.cols() != truth.dim() {
        return Err(Error::Shape(format!(
            "converted is {}x{}, truth expects {}x{}",
            converted.rows(),
            converted.cols(),
            truth.n_frames(),
            truth.dim()
        )));
    }
    Ok(())
}

/// Fraction of converted frames whose nearest class centroid, as rendered
/// by the target speaker, carries the frame's true label.
pub fn content_accuracy(
    converted: &FeatureMatrix,
    truth: &SynthTruth,
    target_speaker: usize,
) -> Result<f64> {
    check_converted(converted, truth, target_speaker)?;
    let centroids = truth.speaker_centroids(target_speaker)?;
    let correct = (0..converted.rows())
        .into_par_iter()
        .filter(|&i| {
            let row = converted.row(i);
            let mut best = (f64::INFINITY, 0);
            for c in 0..centroids.nrows() {
                let dist = (row - centroids.row(c)).norm_squared();
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            best.1 == truth.content_labels[i]
        })
        .count();
    Ok(correct as f64 / converted.rows() as f64)
}

/// Cosine similarity between the mean converted frame and the mean of the
/// target speaker's noiseless frames. Zero if either mean vanishes.
pub fn speaker_score(
    converted: &FeatureMatrix,
    truth: &SynthTruth,
    target_speaker: usize,
) -> Result<f64> {
    check_converted(converted, truth, target_speaker)?;
    let a = converted.column_mean();
    let b = truth.speaker_frames(target_speaker)?.row_mean().transpose();
    let (na, nb) = (a.norm(), b.norm());
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Ok(0.0);
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Splits `rows` into pseudo-utterances: the frames whose labels fall in
/// class pair `{c, c+1}` for even `c`. Empty groups are dropped.
pub fn class_pair_utterances(truth: &SynthTruth, rows: &[usize]) -> Vec<Vec<usize>> {
    let c = truth.n_classes();
    (0..c)
        .step_by(2)
        .map(|first| {
            let second = (first + 1) % c;
            rows.iter()
                .copied()
                .filter(|&i| {
                    let l = truth.content_labels[i];
                    l == first || l == second
                })
                .collect::<Vec<_>>()
        })
        .filter(|u| !u.is_empty())
        .collect()
}

/// Mean [`speaker_score`] over `utterances`, each converted separately from
/// the matching rows of `source` and scored against the target's frames for
/// the same rows.
pub fn utterance_speaker_score<F>(
    source: &FeatureMatrix,
    truth: &SynthTruth,
    target_speaker: usize,
    utterances: &[Vec<usize>],
    convert: F,
) -> Result<f64>
where
    F: Fn(&FeatureMatrix) -> Result<FeatureMatrix>,
{
    if utterances.is_empty() {
        return Err(Error::Parameter("no utterances to score".into()));
    }
    let mut total = 0.0;
    for u in utterances {
        let sub = source.select_rows(u)?;
        let converted = convert(&sub)?;
        total += speaker_score(&converted, &truth.select_rows(u)?, target_speaker)?;
    }
    Ok(total / utterances.len() as f64)
}

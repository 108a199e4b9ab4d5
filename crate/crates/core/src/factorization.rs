//! Shared content subspace plus per-speaker maps.
//!
//! Frames of `K` speakers are aligned to a pivot speaker and concatenated
//! side by side into an `N × K·D` block `X = [X_1 | … | X_K]`. The rank-`r`
//! truncated SVD `X ≈ U Σ Vᵀ` gives the content `C = U Σ` and the speaker
//! maps `S_k`, the `k`-th `D`-column slice of `Vᵀ`, so `X_k ≈ C · S_k`.
//! Conversion from speaker `a` to `b` is `x · S_a⁺ · S_b`.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matching::{gather_targets, match_frames, MatchedPairs};
use crate::tensor_io::{
    create_dir, default_rcond, pinv, read_matrix, svd_thin, write_atomic, write_matrix,
    FeatureMatrix, Manifest, SvdResult,
};

/// Operating rank for conversion.
pub const DEFAULT_RANK: usize = 100;
/// Relative cutoff for the pseudoinverse of a speaker map.
pub const DEFAULT_PINV_RCOND: f64 = 1e-10;
/// Name of the metric every sweep row set carries.
pub const RECONSTRUCTION_METRIC: &str = "reconstruction_rel_error";

/// How each speaker's frames were paired with the pivot's.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub pivot: usize,
    /// `None` at the pivot position.
    pub pairs: Vec<Option<MatchedPairs>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerFactorization {
    pub rank: usize,
    pub speaker_ids: Vec<String>,
    /// Leading `rank` singular values of the block, descending.
    pub sigma: Vec<f64>,
    /// One `rank × D` map per speaker.
    pub speaker_maps: Vec<DMatrix<f64>>,
    pub content_dim: usize,
    pub pivot_id: String,
    /// Singular values above `max(N, K·D)·ε·σ_max`, capped at `rank`.
    pub effective_rank: usize,
    /// Frame count of the block the factorization was fitted on.
    pub n_frames: usize,
    /// `Σ σ²` over the whole spectrum.
    pub total_energy: f64,
    /// `Σ σ²` over the discarded tail.
    pub discarded_energy: f64,
}

fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !ok {
        return Err(Error::Parameter(format!(
            "speaker id `{id}` must be non-empty and use only [A-Za-z0-9_.-]"
        )));
    }
    Ok(())
}

/// Concatenates speaker matrices whose rows are already aligned.
pub fn stack_aligned(speaker_mats: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    check_speakers(speaker_mats, 1)?;
    let refs: Vec<&FeatureMatrix> = speaker_mats.iter().collect();
    FeatureMatrix::hstack(&refs)
}

fn check_speakers(speaker_mats: &[FeatureMatrix], min: usize) -> Result<usize> {
    if speaker_mats.len() < min {
        return Err(Error::Parameter(format!(
            "need at least {min} speakers, got {}",
            speaker_mats.len()
        )));
    }
    let d = speaker_mats[0].cols();
    if let Some(m) = speaker_mats.iter().find(|m| m.cols() != d) {
        return Err(Error::Shape(format!(
            "speakers have {} and {} feature dimensions",
            d,
            m.cols()
        )));
    }
    Ok(d)
}

/// Aligns every speaker to the pivot by `k_match`-nearest cosine matching
/// and concatenates the aligned matrices in speaker order.
pub fn assemble_block(
    speaker_mats: &[FeatureMatrix],
    pivot: usize,
    k_match: usize,
) -> Result<(FeatureMatrix, Alignment)> {
    check_speakers(speaker_mats, 2)?;
    if pivot >= speaker_mats.len() {
        return Err(Error::Parameter(format!(
            "pivot {pivot} out of range for {} speakers",
            speaker_mats.len()
        )));
    }
    let pivot_mat = &speaker_mats[pivot];
    let aligned: Vec<(Option<MatchedPairs>, FeatureMatrix)> = speaker_mats
        .par_iter()
        .enumerate()
        .map(|(j, m)| {
            if j == pivot {
                return Ok((None, m.clone()));
            }
            let pairs = match_frames(pivot_mat, m, k_match)?;
            let gathered = gather_targets(&pairs, m, k_match)?;
            Ok((Some(pairs), gathered))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&FeatureMatrix> = aligned.iter().map(|(_, m)| m).collect();
    let block = FeatureMatrix::hstack(&refs)?;
    let pairs = aligned.into_iter().map(|(p, _)| p).collect();
    Ok((block, Alignment { pivot, pairs }))
}

fn from_svd(
    full: &SvdResult,
    n_frames: usize,
    k_speakers: usize,
    d: usize,
    r: usize,
) -> Result<SpeakerFactorization> {
    let max_r = full.sigma.len();
    if r == 0 || r > max_r {
        return Err(Error::Parameter(format!("rank {r} outside 1..={max_r}")));
    }
    let vt = full.vt.rows(0, r);
    let speaker_maps = (0..k_speakers)
        .map(|k| vt.columns(k * d, d).into_owned())
        .collect();
    let total_energy: f64 = full.sigma.iter().map(|s| s * s).sum();
    let discarded_energy: f64 = full.sigma[r..].iter().map(|s| s * s).sum();
    let effective_rank = full
        .numerical_rank(default_rcond(n_frames, k_speakers * d))
        .min(r);
    Ok(SpeakerFactorization {
        rank: r,
        speaker_ids: (0..k_speakers).map(|k| k.to_string()).collect(),
        sigma: full.sigma[..r].to_vec(),
        speaker_maps,
        content_dim: d,
        pivot_id: "0".to_string(),
        effective_rank,
        n_frames,
        total_energy,
        discarded_energy,
    })
}

fn check_block(block: &FeatureMatrix, k_speakers: usize, d: usize) -> Result<()> {
    if k_speakers == 0 || d == 0 || block.cols() != k_speakers * d {
        return Err(Error::Shape(format!(
            "block has {} columns, expected {k_speakers}·{d}",
            block.cols()
        )));
    }
    Ok(())
}

/// Rank-`r` factorization of an assembled block. Speakers are labelled
/// `"0"…"K-1"` with pivot `"0"`; see [`SpeakerFactorization::with_ids`].
pub fn factorize(
    block: &FeatureMatrix,
    k_speakers: usize,
    d: usize,
    r: usize,
) -> Result<SpeakerFactorization> {
    check_block(block, k_speakers, d)?;
    let max_r = block.rows().min(block.cols());
    if r == 0 || r > max_r {
        return Err(Error::Parameter(format!("rank {r} outside 1..={max_r}")));
    }
    let full = svd_thin(block)?;
    from_svd(&full, block.rows(), k_speakers, d, r)
}

impl SpeakerFactorization {
    pub fn k_speakers(&self) -> usize {
        self.speaker_maps.len()
    }

    /// Relabels speakers. `pivot_id` must be one of `ids`.
    pub fn with_ids(mut self, ids: Vec<String>, pivot_id: &str) -> Result<Self> {
        if ids.len() != self.k_speakers() {
            return Err(Error::Parameter(format!(
                "{} ids for {} speakers",
                ids.len(),
                self.k_speakers()
            )));
        }
        for (i, id) in ids.iter().enumerate() {
            validate_id(id)?;
            if ids[..i].contains(id) {
                return Err(Error::Parameter(format!("duplicate speaker id `{id}`")));
            }
        }
        if !ids.iter().any(|id| id == pivot_id) {
            return Err(Error::UnknownSpeaker(pivot_id.to_string()));
        }
        self.speaker_ids = ids;
        self.pivot_id = pivot_id.to_string();
        Ok(self)
    }

    pub fn speaker_index(&self, id: &str) -> Result<usize> {
        self.speaker_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::UnknownSpeaker(id.to_string()))
    }

    pub fn speaker_map(&self, id: &str) -> Result<&DMatrix<f64>> {
        Ok(&self.speaker_maps[self.speaker_index(id)?])
    }

    /// `Σ_k ‖X_k − C·S_k‖²_F / ‖X‖²_F`, square-rooted.
    pub fn relative_error(&self) -> f64 {
        if self.total_energy == 0.0 {
            0.0
        } else {
            (self.discarded_energy / self.total_energy).sqrt()
        }
    }

    /// `[S_1 | … | S_K]`, the `rank × K·D` right factor.
    pub fn stacked_maps(&self) -> DMatrix<f64> {
        let d = self.content_dim;
        let mut out = DMatrix::zeros(self.rank, d * self.k_speakers());
        for (k, s) in self.speaker_maps.iter().enumerate() {
            out.columns_mut(k * d, d).copy_from(s);
        }
        out
    }

    /// Content codes `C = X·Sᵀ` of a block laid out like the training block.
    pub fn content_codes(&self, block: &FeatureMatrix) -> Result<DMatrix<f64>> {
        check_block(block, self.k_speakers(), self.content_dim)?;
        Ok(block.as_matrix() * self.stacked_maps().transpose())
    }

    /// `Σ_k ‖X_k − C·S_k‖²_F` for `block`, with `C` from [`Self::content_codes`].
    pub fn block_squared_error(&self, block: &FeatureMatrix) -> Result<f64> {
        let c = self.content_codes(block)?;
        Ok((block.as_matrix() - c * self.stacked_maps()).norm_squared())
    }

    /// The `D×D` conversion map `S_src⁺ · S_tgt`.
    pub fn composed_map(&self, src: &str, tgt: &str, rcond: f64) -> Result<DMatrix<f64>> {
        let s_src = self.speaker_map(src)?;
        let s_tgt = self.speaker_map(tgt)?;
        Ok(pinv(s_src, rcond)? * s_tgt)
    }

    /// Writes `sigma.lvcf`, `S_<id>.lvcf` per speaker and `manifest.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_matrix(
            &FeatureMatrix::from_row_slice(1, self.rank, &self.sigma)?,
            dir.join("sigma.lvcf"),
        )?;
        for (id, s) in self.speaker_ids.iter().zip(&self.speaker_maps) {
            write_matrix(
                &FeatureMatrix::new(s.clone())?,
                dir.join(format!("S_{id}.lvcf")),
            )?;
        }
        let mut m = Manifest::new();
        m.set("rank", self.rank)
            .set("content_dim", self.content_dim)
            .set("speakers", self.k_speakers())
            .set("pivot", &self.pivot_id)
            .set("speaker_ids", self.speaker_ids.join(","))
            .set("effective_rank", self.effective_rank)
            .set("n_frames", self.n_frames)
            .set("total_energy", self.total_energy)
            .set("discarded_energy", self.discarded_energy);
        m.write(&dir.join("manifest.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.txt");
        let m = Manifest::read(&mpath)?;
        let rank: usize = m.require_parsed("rank", &mpath)?;
        let d: usize = m.require_parsed("content_dim", &mpath)?;
        let k: usize = m.require_parsed("speakers", &mpath)?;
        let ids: Vec<String> = m
            .require("speaker_ids", &mpath)?
            .split(',')
            .map(str::to_string)
            .collect();
        if ids.len() != k {
            return Err(Error::parse(
                &mpath,
                format!("{} ids for {k} speakers", ids.len()),
            ));
        }
        let sigma = read_matrix(dir.join("sigma.lvcf"))?;
        if sigma.shape() != (1, rank) {
            return Err(Error::parse(dir, format!("sigma should be 1x{rank}")));
        }
        let mut maps = Vec::with_capacity(k);
        for id in &ids {
            validate_id(id)?;
            let s = read_matrix(dir.join(format!("S_{id}.lvcf")))?;
            if s.shape() != (rank, d) {
                return Err(Error::parse(dir, format!("S_{id} should be {rank}x{d}")));
            }
            maps.push(s.into_inner());
        }
        let fact = SpeakerFactorization {
            rank,
            speaker_ids: Vec::new(),
            sigma: sigma.row_vec(0),
            speaker_maps: maps,
            content_dim: d,
            pivot_id: String::new(),
            effective_rank: m.require_parsed("effective_rank", &mpath)?,
            n_frames: m.require_parsed("n_frames", &mpath)?,
            total_energy: m.require_parsed("total_energy", &mpath)?,
            discarded_energy: m.require_parsed("discarded_energy", &mpath)?,
        };
        fact.with_ids(ids, m.require("pivot", &mpath)?)
    }
}

/// `x_src · S_src⁺ · S_tgt`.
pub fn convert(
    fact: &SpeakerFactorization,
    x_src: &FeatureMatrix,
    src: &str,
    tgt: &str,
    rcond: f64,
) -> Result<FeatureMatrix> {
    if x_src.cols() != fact.content_dim {
        return Err(Error::Shape(format!(
            "input has {} columns, factorization has {}",
            x_src.cols(),
            fact.content_dim
        )));
    }
    let map = fact.composed_map(src, tgt, rcond)?;
    FeatureMatrix::new(x_src.as_matrix() * map)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub rank: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn value(&self, rank: usize, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.rank == rank && r.metric == metric)
            .map(|r| r.value)
    }

    /// Values of `metric` in rank order.
    pub fn series(&self, metric: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.rank, r.value))
            .collect()
    }

    /// CSV with header `rank,metric_name,value`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        w.write_record(["rank", "metric_name", "value"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.rank.to_string(), r.metric.clone(), r.value.to_string()])
                .map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Internal(format!("csv: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }
}

/// Factorizes `block` once per rank from a single SVD and records the
/// relative reconstruction error plus whatever `eval_hook` returns.
pub fn rank_sweep_block<F>(
    block: &FeatureMatrix,
    k_speakers: usize,
    d: usize,
    ranks: &[usize],
    eval_hook: F,
) -> Result<SweepReport>
where
    F: Fn(&SpeakerFactorization) -> Result<Vec<(String, f64)>> + Sync,
{
    check_block(block, k_speakers, d)?;
    if ranks.is_empty() {
        return Err(Error::Parameter("no ranks to sweep".into()));
    }
    let max_r = block.rows().min(block.cols());
    if let Some(&bad) = ranks.iter().find(|&&r| r == 0 || r > max_r) {
        return Err(Error::Parameter(format!("rank {bad} outside 1..={max_r}")));
    }
    let full = svd_thin(block)?;
    let per_rank: Vec<Vec<SweepRow>> = ranks
        .par_iter()
        .map(|&r| {
            let fact = from_svd(&full, block.rows(), k_speakers, d, r)?;
            let mut rows = vec![SweepRow {
                rank: r,
                metric: RECONSTRUCTION_METRIC.to_string(),
                value: fact.relative_error(),
            }];
            for (metric, value) in eval_hook(&fact)? {
                rows.push(SweepRow {
                    rank: r,
                    metric,
                    value,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        rows: per_rank.into_iter().flatten().collect(),
    })
}

/// Assembles a block around `pivot` with single-neighbour matching, then
/// sweeps `ranks`.
pub fn rank_sweep<F>(
    speaker_mats: &[FeatureMatrix],
    pivot: usize,
    ranks: &[usize],
    eval_hook: F,
) -> Result<SweepReport>
where
    F: Fn(&SpeakerFactorization) -> Result<Vec<(String, f64)>> + Sync,
{
    let (block, _) = assemble_block(speaker_mats, pivot, 1)?;
    rank_sweep_block(
        &block,
        speaker_mats.len(),
        speaker_mats[0].cols(),
        ranks,
        eval_hook,
    )
}

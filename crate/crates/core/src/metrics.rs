//! Objective evaluation: word/character error rate and equal error rate.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matching::ZERO_NORM;
use crate::tensor_io::{write_atomic, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Word,
    Char,
}

impl Unit {
    pub fn metric_name(self) -> &'static str {
        match self {
            Unit::Word => "wer",
            Unit::Char => "cer",
        }
    }
}

/// Minimum number of unit-cost substitutions, insertions and deletions
/// turning `hypothesis` into `reference`.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and collapses whitespace runs to single spaces.
pub fn normalize_text(text: &str) -> String {
    let kept: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(text: &str, unit: Unit) -> Vec<String> {
    let norm = normalize_text(text);
    match unit {
        Unit::Word => norm
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect(),
        Unit::Char => norm.chars().map(String::from).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRateReport {
    pub metric: String,
    pub value: f64,
    /// Edit operations, or misclassified trials for EER-style reports.
    pub errors: usize,
    /// Reference tokens (or trials) the rate is normalised by.
    pub support: usize,
}

/// Edit distance over the reference length after normalisation.
pub fn error_rate(reference: &str, hypothesis: &str, unit: Unit) -> Result<ErrorRateReport> {
    corpus_error_rate(&[(reference, hypothesis)], unit)
}

pub fn wer(reference: &str, hypothesis: &str, unit: Unit) -> Result<f64> {
    Ok(error_rate(reference, hypothesis, unit)?.value)
}

/// Total edits over total reference tokens across all pairs.
pub fn corpus_error_rate<R: AsRef<str>, H: AsRef<str>>(
    pairs: &[(R, H)],
    unit: Unit,
) -> Result<ErrorRateReport> {
    let mut errors = 0;
    let mut support = 0;
    for (r, h) in pairs {
        let rt = tokens(r.as_ref(), unit);
        if rt.is_empty() {
            return Err(Error::UndefinedMetric(format!(
                "reference `{}` is empty after normalisation",
                r.as_ref()
            )));
        }
        errors += edit_distance(&rt, &tokens(h.as_ref(), unit));
        support += rt.len();
    }
    if support == 0 {
        return Err(Error::UndefinedMetric("no reference tokens".into()));
    }
    Ok(ErrorRateReport {
        metric: unit.metric_name().to_string(),
        value: errors as f64 / support as f64,
        errors,
        support,
    })
}

/// Verification trial scores; higher means more target-like.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Result<Self> {
        if genuine.is_empty() || impostor.is_empty() {
            return Err(Error::Parameter(
                "genuine and impostor scores must both be non-empty".into(),
            ));
        }
        if genuine.iter().chain(&impostor).any(|s| !s.is_finite()) {
            return Err(Error::Parameter("scores must be finite".into()));
        }
        Ok(ScoreSet { genuine, impostor })
    }

    pub fn genuine(&self) -> &[f64] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }

    pub fn swapped(&self) -> ScoreSet {
        ScoreSet {
            genuine: self.impostor.clone(),
            impostor: self.genuine.clone(),
        }
    }

    /// Reads `label,score` rows, label ∈ {genuine, impostor}. A header row
    /// is skipped if present.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::parse(
                    path,
                    format!("row {}: expected 2 fields", n + 1),
                ));
            }
            if n == 0 && &rec[0] == "label" {
                continue;
            }
            let score: f64 = rec[1].parse().map_err(|_| {
                Error::parse(path, format!("row {}: bad score `{}`", n + 1, &rec[1]))
            })?;
            match &rec[0] {
                "genuine" => genuine.push(score),
                "impostor" => impostor.push(score),
                other => {
                    return Err(Error::parse(
                        path,
                        format!("row {}: bad label `{other}`", n + 1),
                    ))
                }
            }
        }
        ScoreSet::new(genuine, impostor)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let csv_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "score"]).map_err(csv_err)?;
        for (label, list) in [("genuine", &self.genuine), ("impostor", &self.impostor)] {
            for s in list {
                w.write_record([label, &s.to_string()]).map_err(csv_err)?;
            }
        }
        w.into_inner()
            .map_err(|e| Error::Internal(format!("csv: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }
}

/// Equal error rate.
///
/// Thresholds sweep the sorted union of scores plus `+∞`. At threshold `t`,
/// FAR is the share of impostors scoring `≥ t` and FRR the share of genuine
/// trials scoring `< t`. Returns the common value at the first operating
/// point where FRR reaches FAR, interpolating linearly from the previous
/// point when they cross between two thresholds.
pub fn eer(scores: &ScoreSet) -> f64 {
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let point = |t: f64| {
        let far = (imp.len() - imp.partition_point(|&s| s < t)) as f64 / ni;
        let frr = gen.partition_point(|&s| s < t) as f64 / ng;
        (far, frr)
    };
    let mut prev: Option<(f64, f64)> = None;
    for t in thresholds.into_iter().chain(std::iter::once(f64::INFINITY)) {
        let (far, frr) = if t == f64::INFINITY {
            (0.0, 1.0)
        } else {
            point(t)
        };
        if frr >= far {
            if frr == far {
                return far;
            }
            let (pfar, pfrr) = prev.expect("the lowest threshold has FRR = 0");
            let gap_prev = pfar - pfrr;
            let gap = far - frr;
            let lambda = gap_prev / (gap_prev - gap);
            return pfar + lambda * (far - pfar);
        }
        prev = Some((far, frr));
    }
    unreachable!("the +inf threshold always has FRR >= FAR")
}

/// Which trials count as genuine when scoring converted speech.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrialDesign {
    /// Real target utterances are genuine and converted utterances are
    /// impostors. A higher EER means the conversions fool the verifier more,
    /// and 0.5 means they are indistinguishable.
    #[default]
    RealVsConverted,
    /// Converted utterances are genuine and real utterances of the other
    /// speakers are impostors. A lower EER means closer to the target.
    ConvertedVsOthers,
}

impl fmt::Display for TrialDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialDesign::RealVsConverted => "real-vs-converted",
            TrialDesign::ConvertedVsOthers => "converted-vs-others",
        })
    }
}

impl FromStr for TrialDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real-vs-converted" => Ok(TrialDesign::RealVsConverted),
            "converted-vs-others" => Ok(TrialDesign::ConvertedVsOthers),
            _ => Err(Error::Parameter(format!("unknown trial design `{s}`"))),
        }
    }
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na < ZERO_NORM || nb < ZERO_NORM {
        0.0
    } else {
        a.dot(b) / (na * nb)
    }
}

/// Scores utterances against the target speaker with a mean-embedding
/// cosine verifier.
///
/// Each utterance is embedded as its mean frame. The target's enrolment
/// embedding is the mean of its real utterances' embeddings. `real_sets[k]`
/// holds speaker `k`'s real utterances.
pub fn verification_scores(
    converted: &[FeatureMatrix],
    real_sets: &[Vec<FeatureMatrix>],
    target: usize,
    design: TrialDesign,
) -> Result<ScoreSet> {
    let real_target = real_sets
        .get(target)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Parameter(format!("no real utterances for target {target}")))?;
    let d = real_target[0].cols();
    let all = converted.iter().chain(real_sets.iter().flatten());
    if let Some(m) = all.clone().find(|m| m.cols() != d) {
        return Err(Error::Shape(format!(
            "utterances have {} and {} feature dimensions",
            d,
            m.cols()
        )));
    }
    let mut enrol = DVector::zeros(d);
    for u in real_target {
        enrol += u.column_mean();
    }
    enrol /= real_target.len() as f64;
    let score = |u: &FeatureMatrix| cosine(&u.column_mean(), &enrol);

    let converted_scores: Vec<f64> = converted.iter().map(score).collect();
    match design {
        TrialDesign::RealVsConverted => {
            ScoreSet::new(real_target.iter().map(score).collect(), converted_scores)
        }
        TrialDesign::ConvertedVsOthers => {
            let others = real_sets
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != target)
                .flat_map(|(_, set)| set.iter().map(score))
                .collect();
            ScoreSet::new(converted_scores, others)
        }
    }
}

/// Reads `id<TAB>text` lines. Blank lines are skipped.
pub fn read_transcripts(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.split_once('\t')
                .map(|(id, t)| (id.trim().to_string(), t.to_string()))
                .ok_or_else(|| Error::parse(path, format!("line {}: expected id<TAB>text", n + 1)))
        })
        .collect()
}

/// Pairs transcripts by id and computes the corpus error rate. Every
/// reference id must have a hypothesis.
pub fn transcript_error_rate(
    references: &[(String, String)],
    hypotheses: &[(String, String)],
    unit: Unit,
) -> Result<ErrorRateReport> {
    let pairs = references
        .iter()
        .map(|(id, r)| {
            hypotheses
                .iter()
                .find(|(hid, _)| hid == id)
                .map(|(_, h)| (r.as_str(), h.as_str()))
                .ok_or_else(|| Error::Parameter(format!("no hypothesis for utterance `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    corpus_error_rate(&pairs, unit)
}

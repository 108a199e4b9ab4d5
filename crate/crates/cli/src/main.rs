use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linearvc::factorization::{
    assemble_block, convert, factorize, rank_sweep_block, DEFAULT_PINV_RCOND, DEFAULT_RANK,
};
use linearvc::matching::{gather_targets, match_frames};
use linearvc::metrics::{eer, read_transcripts, transcript_error_rate, Unit};
use linearvc::synth::{content_accuracy, generate, read_dataset, speaker_score, write_dataset};
use linearvc::tensor_io::{read_matrix, write_matrix};
use linearvc::transforms::{
    apply, export_viz, fit_with, knn_convert, weight_percentile, FitOptions, DEFAULT_KNN_K,
    DEFAULT_VIZ_DIMS, DEFAULT_VIZ_PERCENTILE,
};
use linearvc::{
    FeatureMatrix, LinearMap, MapKind, ScoreSet, SpeakerFactorization, SynthSpec, TransformFamily,
};
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(
    name = "linearvc",
    version,
    about = "Linear voice conversion over speech feature matrices"
)]
struct Cli {
    /// Worker threads; all cores when unset. Outputs do not depend on it.
    #[arg(long, global = true, env = "LINEARVC_THREADS")]
    threads: Option<usize>,

    /// Seed for randomized steps.
    #[arg(long, global = true, env = "LINEARVC_SEED", default_value_t = 17)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair each source frame with its k cosine-nearest target frames.
    Match(MatchArgs),
    /// Fit a linear map from source to target features.
    Fit(FitArgs),
    /// Apply a fitted map.
    Apply(ApplyArgs),
    /// Replace each source frame by the mean of its k nearest pool frames.
    KnnConvert(KnnArgs),
    /// Factorize several speakers into shared content and per-speaker maps.
    Factorize(FactorizeArgs),
    /// Convert features between two speakers of a factorization.
    Convert(ConvertArgs),
    /// Reconstruction error (and synthetic metrics) across ranks.
    RankSweep(SweepArgs),
    /// Generate a planted multi-speaker dataset.
    Synth(SynthArgs),
    /// Error rates and EER.
    Eval(EvalArgs),
    /// Threshold a map's weight into a PGM image.
    ExportViz(VizArgs),
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Neighbours per source frame.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Output LVCF with columns (source index, target index, distance).
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Bias,
    Orthogonal,
    Unconstrained,
}

impl From<KindArg> for MapKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Bias => MapKind::BiasOnly,
            KindArg::Orthogonal => MapKind::Orthogonal,
            KindArg::Unconstrained => MapKind::Unconstrained,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Unconstrained)]
    kind: KindArg,
    /// Also fit a bias vector.
    #[arg(long)]
    bias: bool,
    /// Rows of --src and --tgt are already paired; skip matching.
    #[arg(long)]
    aligned: bool,
    /// Target neighbours averaged per source frame when matching.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Ridge penalty for the unconstrained map.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    /// Map directory written by `fit`.
    #[arg(long)]
    map: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct KnnArgs {
    #[arg(long)]
    src: PathBuf,
    /// Target speaker's frames.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SpeakerList {
    /// Speaker as id=path.lvcf; repeat for each speaker.
    #[arg(long = "speaker", value_parser = parse_speaker)]
    speakers: Vec<(String, PathBuf)>,
    /// Speaker the others are matched to; lexicographically first id if unset.
    #[arg(long)]
    pivot: Option<String>,
    /// Frames averaged per pivot frame when matching.
    #[arg(long = "k", default_value_t = 1)]
    k_match: usize,
}

#[derive(Args, Debug)]
struct FactorizeArgs {
    #[command(flatten)]
    speakers: SpeakerList,
    #[arg(long, default_value_t = DEFAULT_RANK)]
    rank: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Factorization directory.
    #[arg(long)]
    fact: PathBuf,
    #[arg(long)]
    src_id: String,
    #[arg(long)]
    tgt_id: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Relative cutoff for the pseudoinverse.
    #[arg(long, default_value_t = DEFAULT_PINV_RCOND)]
    rcond: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    speakers: SpeakerList,
    /// Synthetic dataset directory written by `synth`; replaces --speaker
    /// and adds content_accuracy and speaker_score rows.
    #[arg(long, conflicts_with = "speakers")]
    synth: Option<PathBuf>,
    /// Source speaker index for synthetic metrics.
    #[arg(long, default_value_t = 1, requires = "synth")]
    eval_src: usize,
    /// Target speaker index for synthetic metrics.
    #[arg(long, default_value_t = 2, requires = "synth")]
    eval_tgt: usize,
    /// Comma-separated ranks.
    #[arg(long, value_delimiter = ',', required = true)]
    ranks: Vec<usize>,
    /// Output CSV (rank,metric_name,value).
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    Orthogonal,
    Affine,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n_frames: usize,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    r_true: usize,
    #[arg(long, default_value_t = 4)]
    k_speakers: usize,
    #[arg(long, default_value_t = 20)]
    n_content_classes: usize,
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Orthogonal)]
    transform_family: FamilyArg,
    /// Size of each speaker's rotation away from the shared embedding.
    #[arg(long, default_value_t = 0.6)]
    speaker_spread: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(subcommand)]
    metric: EvalMetric,
}

#[derive(Subcommand, Debug)]
enum EvalMetric {
    /// Word error rate between id<TAB>text transcript files.
    Wer(TranscriptArgs),
    /// Character error rate between id<TAB>text transcript files.
    Cer(TranscriptArgs),
    /// Equal error rate from a score CSV (label,score with genuine|impostor labels).
    Eer(EerArgs),
}

#[derive(Args, Debug)]
struct TranscriptArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
}

#[derive(Args, Debug)]
struct EerArgs {
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args, Debug)]
struct VizArgs {
    /// Map directory written by `fit`.
    #[arg(long)]
    map: PathBuf,
    /// Magnitude threshold; the 99th percentile of |weight| when unset.
    #[arg(long)]
    threshold: Option<f64>,
    /// Leading rows and columns to draw.
    #[arg(long, default_value_t = DEFAULT_VIZ_DIMS)]
    dims: usize,
    /// Output PGM.
    #[arg(long)]
    out: PathBuf,
}

fn parse_speaker(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (id, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected id=path, got `{s}`"))?;
    if id.is_empty() || path.is_empty() {
        return Err(format!("expected id=path, got `{s}`"));
    }
    Ok((id.to_string(), PathBuf::from(path)))
}

type Metrics = Map<String, Value>;

fn read(path: &Path) -> Result<FeatureMatrix> {
    read_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input {} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!(
            "input {} does not exist or is not a directory",
            path.display()
        );
    }
    Ok(())
}

fn run_match(a: &MatchArgs, m: &mut Metrics) -> Result<()> {
    require_file(&a.src)?;
    require_file(&a.tgt)?;
    let pairs = match_frames(&read(&a.src)?, &read(&a.tgt)?, a.k)?;
    write_matrix(&pairs.to_matrix()?, &a.out)?;
    let mean = pairs.distances.iter().sum::<f64>() / pairs.len() as f64;
    m.insert("pairs".into(), json!(pairs.len()));
    m.insert("mean_distance".into(), json!(mean));
    Ok(())
}

fn run_fit(a: &FitArgs, m: &mut Metrics) -> Result<()> {
    require_file(&a.src)?;
    require_file(&a.tgt)?;
    if !(a.ridge >= 0.0 && a.ridge.is_finite()) {
        bail!("--ridge must be finite and >= 0");
    }
    let x = read(&a.src)?;
    let tgt = read(&a.tgt)?;
    let y = if a.aligned {
        tgt
    } else {
        gather_targets(&match_frames(&x, &tgt, a.k)?, &tgt, a.k)?
    };
    let opts = FitOptions {
        ridge: a.ridge,
        rcond: None,
    };
    let map = fit_with(&x, &y, a.kind.into(), a.bias, &opts)?;
    map.save(&a.out)?;
    let err = map.squared_error(&x, &y)?;
    m.insert("kind".into(), json!(map.kind.as_str()));
    m.insert("with_bias".into(), json!(map.with_bias));
    m.insert("frames".into(), json!(x.rows()));
    m.insert("dim".into(), json!(x.cols()));
    m.insert(
        "relative_fit_error".into(),
        json!((err / y.as_matrix().norm_squared()).sqrt()),
    );
    m.insert(
        "orthogonality_defect".into(),
        json!(map.orthogonality_defect()),
    );
    Ok(())
}

fn run_apply(a: &ApplyArgs, m: &mut Metrics) -> Result<()> {
    require_dir(&a.map)?;
    require_file(&a.input)?;
    let map = LinearMap::load(&a.map)?;
    let out = apply(&map, &read(&a.input)?)?;
    write_matrix(&out, &a.out)?;
    m.insert("frames".into(), json!(out.rows()));
    Ok(())
}

fn run_knn(a: &KnnArgs, m: &mut Metrics) -> Result<()> {
    require_file(&a.src)?;
    require_file(&a.pool)?;
    let out = knn_convert(&read(&a.src)?, &read(&a.pool)?, a.k)?;
    write_matrix(&out, &a.out)?;
    m.insert("frames".into(), json!(out.rows()));
    m.insert("k".into(), json!(a.k));
    Ok(())
}

struct LoadedSpeakers {
    ids: Vec<String>,
    mats: Vec<FeatureMatrix>,
    pivot: usize,
}

fn load_speakers(list: &SpeakerList) -> Result<LoadedSpeakers> {
    if list.speakers.len() < 2 {
        bail!("need at least two --speaker id=path entries");
    }
    let mut ids = Vec::with_capacity(list.speakers.len());
    for (id, path) in &list.speakers {
        if ids.contains(id) {
            bail!("duplicate speaker id `{id}`");
        }
        require_file(path)?;
        ids.push(id.clone());
    }
    let pivot_id = match &list.pivot {
        Some(p) => p.clone(),
        None => ids.iter().min().cloned().expect("non-empty"),
    };
    let pivot = ids
        .iter()
        .position(|id| *id == pivot_id)
        .with_context(|| format!("pivot `{pivot_id}` is not a listed speaker"))?;
    let mats = list
        .speakers
        .iter()
        .map(|(_, p)| read(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedSpeakers { ids, mats, pivot })
}

fn run_factorize(a: &FactorizeArgs, m: &mut Metrics) -> Result<()> {
    let sp = load_speakers(&a.speakers)?;
    let (block, _) = assemble_block(&sp.mats, sp.pivot, a.speakers.k_match)?;
    let d = sp.mats[0].cols();
    let pivot_id = sp.ids[sp.pivot].clone();
    let fact = factorize(&block, sp.mats.len(), d, a.rank)?.with_ids(sp.ids, &pivot_id)?;
    fact.save(&a.out)?;
    m.insert("rank".into(), json!(fact.rank));
    m.insert("effective_rank".into(), json!(fact.effective_rank));
    m.insert("speakers".into(), json!(fact.k_speakers()));
    m.insert("pivot".into(), json!(fact.pivot_id));
    m.insert("frames".into(), json!(fact.n_frames));
    m.insert(
        "reconstruction_rel_error".into(),
        json!(fact.relative_error()),
    );
    Ok(())
}

fn run_convert(a: &ConvertArgs, m: &mut Metrics) -> Result<()> {
    require_dir(&a.fact)?;
    require_file(&a.input)?;
    if !(a.rcond >= 0.0 && a.rcond.is_finite()) {
        bail!("--rcond must be finite and >= 0");
    }
    let fact = SpeakerFactorization::load(&a.fact)?;
    let out = convert(&fact, &read(&a.input)?, &a.src_id, &a.tgt_id, a.rcond)?;
    write_matrix(&out, &a.out)?;
    m.insert("frames".into(), json!(out.rows()));
    m.insert("rank".into(), json!(fact.rank));
    Ok(())
}

fn run_sweep(a: &SweepArgs, m: &mut Metrics) -> Result<()> {
    let report = if let Some(dir) = &a.synth {
        require_dir(dir)?;
        let (spec, mats, truth) = read_dataset(dir)?;
        let k = spec.k_speakers;
        if a.eval_src >= k || a.eval_tgt >= k {
            bail!("--eval-src/--eval-tgt must be below {k}");
        }
        let pivot = match &a.speakers.pivot {
            Some(p) => p
                .parse::<usize>()
                .ok()
                .filter(|&p| p < k)
                .with_context(|| format!("pivot `{p}` is not a speaker index below {k}"))?,
            None => 0,
        };
        let (block, _) = assemble_block(&mats, pivot, a.speakers.k_match)?;
        let (src, tgt) = (a.eval_src.to_string(), a.eval_tgt.to_string());
        rank_sweep_block(&block, k, spec.d, &a.ranks, |f| {
            let out = convert(f, &mats[a.eval_src], &src, &tgt, DEFAULT_PINV_RCOND)?;
            Ok(vec![
                (
                    "content_accuracy".into(),
                    content_accuracy(&out, &truth, a.eval_tgt)?,
                ),
                (
                    "speaker_score".into(),
                    speaker_score(&out, &truth, a.eval_tgt)?,
                ),
            ])
        })?
    } else {
        let sp = load_speakers(&a.speakers)?;
        let (block, _) = assemble_block(&sp.mats, sp.pivot, a.speakers.k_match)?;
        rank_sweep_block(&block, sp.mats.len(), sp.mats[0].cols(), &a.ranks, |_| {
            Ok(vec![])
        })?
    };
    report.write_csv(&a.out)?;
    m.insert("ranks".into(), json!(a.ranks));
    m.insert("rows".into(), json!(report.rows.len()));
    for (r, v) in report.series(linearvc::factorization::RECONSTRUCTION_METRIC) {
        m.insert(format!("reconstruction_rel_error@{r}"), json!(v));
    }
    Ok(())
}

fn run_synth(a: &SynthArgs, seed: u64, m: &mut Metrics) -> Result<()> {
    let spec = SynthSpec {
        n_frames: a.n_frames,
        d: a.d,
        r_true: a.r_true,
        k_speakers: a.k_speakers,
        n_content_classes: a.n_content_classes,
        noise_sigma: a.noise_sigma,
        transform_family: match a.transform_family {
            FamilyArg::Orthogonal => TransformFamily::Orthogonal,
            FamilyArg::Affine => TransformFamily::Affine,
        },
        seed,
        speaker_spread: a.speaker_spread,
    };
    let (mats, truth) = generate(&spec)?;
    write_dataset(&a.out, &spec, &mats, &truth)?;
    m.insert("speakers".into(), json!(spec.k_speakers));
    m.insert("frames".into(), json!(spec.n_frames));
    m.insert("dim".into(), json!(spec.d));
    m.insert("seed".into(), json!(seed));
    Ok(())
}

fn run_eval(a: &EvalArgs, m: &mut Metrics) -> Result<()> {
    match &a.metric {
        EvalMetric::Wer(t) | EvalMetric::Cer(t) => {
            let unit = if matches!(a.metric, EvalMetric::Wer(_)) {
                Unit::Word
            } else {
                Unit::Char
            };
            require_file(&t.reference)?;
            require_file(&t.hyp)?;
            let report = transcript_error_rate(
                &read_transcripts(&t.reference)?,
                &read_transcripts(&t.hyp)?,
                unit,
            )?;
            m.insert(report.metric.clone(), json!(report.value));
            m.insert("errors".into(), json!(report.errors));
            m.insert("support".into(), json!(report.support));
        }
        EvalMetric::Eer(e) => {
            require_file(&e.scores)?;
            let scores = ScoreSet::read_csv(&e.scores)?;
            m.insert("eer".into(), json!(eer(&scores)));
            m.insert("genuine".into(), json!(scores.genuine().len()));
            m.insert("impostor".into(), json!(scores.impostor().len()));
        }
    }
    Ok(())
}

fn run_viz(a: &VizArgs, m: &mut Metrics) -> Result<()> {
    require_dir(&a.map)?;
    let map = LinearMap::load(&a.map)?;
    let threshold = match a.threshold {
        Some(t) => t,
        None => weight_percentile(&map, DEFAULT_VIZ_PERCENTILE)?,
    };
    let img = export_viz(&map, threshold, a.dims)?;
    img.write_pgm(&a.out)?;
    m.insert("threshold".into(), json!(threshold));
    m.insert("dims".into(), json!(a.dims));
    m.insert("set_pixels".into(), json!(img.count_set()));
    Ok(())
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Match(_) => "match",
        Command::Fit(_) => "fit",
        Command::Apply(_) => "apply",
        Command::KnnConvert(_) => "knn-convert",
        Command::Factorize(_) => "factorize",
        Command::Convert(_) => "convert",
        Command::RankSweep(_) => "rank-sweep",
        Command::Synth(_) => "synth",
        Command::Eval(e) => match e.metric {
            EvalMetric::Wer(_) => "eval wer",
            EvalMetric::Cer(_) => "eval cer",
            EvalMetric::Eer(_) => "eval eer",
        },
        Command::ExportViz(_) => "export-viz",
    }
}

fn run(cli: &Cli) -> Result<Metrics> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut m = Metrics::new();
    match &cli.command {
        Command::Match(a) => run_match(a, &mut m)?,
        Command::Fit(a) => run_fit(a, &mut m)?,
        Command::Apply(a) => run_apply(a, &mut m)?,
        Command::KnnConvert(a) => run_knn(a, &mut m)?,
        Command::Factorize(a) => run_factorize(a, &mut m)?,
        Command::Convert(a) => run_convert(a, &mut m)?,
        Command::RankSweep(a) => run_sweep(a, &mut m)?,
        Command::Synth(a) => run_synth(a, cli.seed, &mut m)?,
        Command::Eval(a) => run_eval(a, &mut m)?,
        Command::ExportViz(a) => run_viz(a, &mut m)?,
    }
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok(metrics) => {
            let summary = json!({
                "subcommand": name(&cli.command),
                "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
                "metrics": metrics,
            });
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

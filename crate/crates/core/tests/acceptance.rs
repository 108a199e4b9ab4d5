//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p linearvc-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{features, gaussian, random_orthogonal, rel_diff, rng};
use linearvc::factorization::{
    assemble_block, convert, factorize, rank_sweep_block, stack_aligned, DEFAULT_PINV_RCOND,
};
use linearvc::matching::{cosine_distance, gather_targets, match_frames};
use linearvc::metrics::{edit_distance, eer, wer, Unit};
use linearvc::synth::{class_pair_utterances, content_accuracy, generate, utterance_speaker_score};
use linearvc::tensor_io::{default_rcond, lstsq, lvcf};
use linearvc::transforms::{apply, fit};
use linearvc::{Error, FeatureMatrix, MapKind, ScoreSet, SynthSpec, TransformFamily};
use nalgebra::DMatrix;
use rand::Rng;

const SEEDS: u64 = 10;
const R_TRUE: usize = 8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn least_squares() -> Outcome {
    let mut r = rng(101);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let d = r.random_range(1..=64);
        let n = if i % 5 == 0 {
            r.random_range(1..=d)
        } else {
            r.random_range(d..=500)
        };
        let x = gaussian(&mut r, n, d);
        let y = gaussian(&mut r, n, d);
        let w = lstsq(&x, &y, default_rcond(n, d)).expect("lstsq");
        let ratio = (x.transpose() * (&y - &x * &w)).norm() / (x.transpose() * &y).norm();
        worst = worst.max(ratio);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 5.0,
        format!("worst residual ratio {worst:.2e} (<= 1e-6), {secs:.2}s (< 5s)"),
    )
}

fn procrustes_recovery() -> Outcome {
    let mut r = rng(102);
    let (mut worst_w, mut worst_orth, mut reflections): (f64, f64, usize) = (0.0, 0.0, 0);
    let mut pass = true;
    for i in 0..50 {
        let d = r.random_range(1..=32);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let rot = random_orthogonal(&mut r, d, sign);
        let x = features(&mut r, 2 * d + 10, d);
        let y = FeatureMatrix::new(x.as_matrix() * &rot).unwrap();
        let map = fit(&x, &y, MapKind::Orthogonal, false).expect("fit");
        let ew = (&map.weight - &rot).norm();
        let eo = map.orthogonality_defect();
        pass &= ew <= 1e-8 && eo <= 1e-8 * d as f64;
        if sign < 0.0 {
            reflections += 1;
            pass &= map.weight.determinant() < 0.0;
        }
        worst_w = worst_w.max(ew);
        worst_orth = worst_orth.max(eo / d as f64);
    }
    outcome(
        pass,
        format!(
            "max |W-R| {worst_w:.2e} (<= 1e-8), max |WtW-I|/D {worst_orth:.2e} (<= 1e-8), {reflections} reflections"
        ),
    )
}

fn nesting() -> Outcome {
    let mut r = rng(103);
    let mut violations = 0;
    let instances = 200;
    for _ in 0..instances {
        let d = r.random_range(1..=16);
        let n = r.random_range(2..=80);
        let x = features(&mut r, n, d);
        // targets: either independent or a noisy affine image
        let y = if r.random::<bool>() {
            features(&mut r, n, d)
        } else {
            let mut m = x.as_matrix() * gaussian(&mut r, d, d) + gaussian(&mut r, n, d) * 0.1;
            let b = gaussian(&mut r, 1, d);
            for mut row in m.row_iter_mut() {
                row += &b;
            }
            FeatureMatrix::new(m).unwrap()
        };
        let e = |kind, bias| {
            fit(&x, &y, kind, bias)
                .unwrap()
                .squared_error(&x, &y)
                .unwrap()
        };
        let uncb = e(MapKind::Unconstrained, true);
        let unc = e(MapKind::Unconstrained, false);
        let orth = e(MapKind::Orthogonal, false);
        let orthb = e(MapKind::Orthogonal, true);
        let bias = e(MapKind::BiasOnly, true);
        // interpolating fits leave only roundoff, so slack has a floor at
        // machine precision relative to the target's energy
        let floor = 64.0 * f64::EPSILON * y.as_matrix().norm_squared();
        let le = |a: f64, b: f64| a <= b + (1e-9 * b).max(floor);
        let ok =
            le(uncb, unc) && le(unc, orth) && le(uncb, orthb) && le(orthb, bias) && le(uncb, bias);
        if !ok {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations}/{instances} instances violate unc+b <= unc <= orth, unc+b <= orth+b <= bias_only"),
    )
}

fn eckart_young() -> Outcome {
    let mut r = rng(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = r.random_range(1..=4);
        let d = r.random_range(1..=64);
        let n = r.random_range(2..=300);
        let block = features(&mut r, n, k * d);
        let rank = r.random_range(1..=n.min(k * d));
        let f = factorize(&block, k, d, rank).expect("factorize");
        let err = f.block_squared_error(&block).unwrap();
        let rel = (err - f.discarded_energy).abs() / f.discarded_energy.max(1e-12 * f.total_energy);
        worst = worst.max(rel);
    }
    outcome(
        worst <= 1e-6,
        format!("worst relative gap {worst:.2e} (<= 1e-6)"),
    )
}

fn planted_conversion() -> Outcome {
    let start = Instant::now();
    let (mut vs_truth, mut vs_direct): (f64, f64) = (0.0, 0.0);
    for seed in 0..3 {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            seed,
            ..SynthSpec::default()
        };
        let (mats, truth) = generate(&spec).expect("synth");
        let f = factorize(
            &stack_aligned(&mats).unwrap(),
            spec.k_speakers,
            spec.d,
            R_TRUE,
        )
        .expect("factorize");
        for (src, tgt) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            let out = convert(
                &f,
                &mats[src],
                &src.to_string(),
                &tgt.to_string(),
                DEFAULT_PINV_RCOND,
            )
            .unwrap();
            vs_truth = vs_truth.max(rel_diff(
                out.as_matrix(),
                &truth.speaker_frames(tgt).unwrap(),
            ));
            let direct = apply(
                &fit(&mats[src], &mats[tgt], MapKind::Unconstrained, false).unwrap(),
                &mats[src],
            )
            .unwrap();
            vs_direct = vs_direct.max(rel_diff(out.as_matrix(), direct.as_matrix()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        vs_truth <= 1e-6 && vs_direct <= 1e-5 && secs < 10.0,
        format!(
            "vs truth {vs_truth:.2e} (<= 1e-6), vs direct fit {vs_direct:.2e} (<= 1e-5), {secs:.2}s (< 10s)"
        ),
    )
}

fn ranks_avg(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            out[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks_avg(a), ranks_avg(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn split(n: usize) -> (Vec<usize>, Vec<usize>) {
    ((0..n).step_by(2).collect(), (1..n).step_by(2).collect())
}

fn rank_trend() -> Outcome {
    let ranks = [1, 2, 3, 4, 5, 6, 7, 8, 12, 16];
    let pairs = [(1, 2), (2, 3), (3, 1), (0, 2)];
    let mut acc = vec![Vec::new(); ranks.len()];
    let mut score = vec![Vec::new(); ranks.len()];
    for seed in 0..SEEDS {
        let spec = SynthSpec {
            seed,
            ..SynthSpec::default()
        };
        let (mats, truth) = generate(&spec).expect("synth");
        let (train, test) = split(spec.n_frames);
        let train_mats: Vec<FeatureMatrix> = mats
            .iter()
            .map(|m| m.select_rows(&train).unwrap())
            .collect();
        let (block, _) = assemble_block(&train_mats, 0, 1).expect("assemble");
        let test_truth = truth.select_rows(&test).unwrap();
        let utts = class_pair_utterances(&truth, &test);
        let report = rank_sweep_block(&block, spec.k_speakers, spec.d, &ranks, |f| {
            let (mut a, mut s) = (0.0, 0.0);
            for &(src, tgt) in &pairs {
                let map = f.composed_map(&src.to_string(), &tgt.to_string(), DEFAULT_PINV_RCOND)?;
                let conv = |x: &FeatureMatrix| FeatureMatrix::new(x.as_matrix() * &map);
                a += content_accuracy(&conv(&mats[src].select_rows(&test)?)?, &test_truth, tgt)?;
                s += utterance_speaker_score(&mats[src], &truth, tgt, &utts, conv)?;
            }
            let k = pairs.len() as f64;
            Ok(vec![
                ("content_accuracy".into(), a / k),
                ("speaker_score".into(), s / k),
            ])
        })
        .expect("sweep");
        for (i, &r) in ranks.iter().enumerate() {
            acc[i].push(report.value(r, "content_accuracy").unwrap());
            score[i].push(report.value(r, "speaker_score").unwrap());
        }
    }
    let mean_acc: Vec<f64> = acc.iter().map(|v| mean(v)).collect();
    let mean_score: Vec<f64> = score.iter().map(|v| mean(v)).collect();
    let at = |r: usize| ranks.iter().position(|&x| x == r).unwrap();
    let high_ok = ranks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= R_TRUE)
        .all(|(i, _)| mean_acc[i] >= 0.95);
    let drop = mean_acc[at(R_TRUE)] - mean_acc[at(R_TRUE / 4)];
    let upto = at(R_TRUE) + 1;
    let rho = spearman(
        &ranks[..upto].iter().map(|&r| r as f64).collect::<Vec<_>>(),
        &mean_score[..upto],
    );
    let table: Vec<String> = ranks
        .iter()
        .zip(mean_acc.iter().zip(&mean_score))
        .map(|(r, (a, s))| format!("r{r}:{a:.3}/{s:.3}"))
        .collect();
    outcome(
        high_ok && drop >= 0.10 && rho > 0.9,
        format!(
            "acc >= 0.95 for r >= {R_TRUE}: {high_ok}; drop at r={} {drop:.3} (>= 0.10); spearman {rho:.3} (> 0.9); acc/score {}",
            R_TRUE / 4,
            table.join(" ")
        ),
    )
}

fn bootstrap_ci(values: &[f64], seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..10_000)
        .map(|_| (0..n).map(|_| values[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (means[249], means[9_749])
}

fn family_trend() -> Outcome {
    let kinds = [
        (MapKind::BiasOnly, true),
        (MapKind::Orthogonal, false),
        (MapKind::Unconstrained, false),
    ];
    let mut scores = vec![Vec::new(); kinds.len()];
    for seed in 0..SEEDS {
        let spec = SynthSpec {
            transform_family: TransformFamily::Affine,
            seed,
            ..SynthSpec::default()
        };
        let (mats, truth) = generate(&spec).expect("synth");
        let (train, test) = split(spec.n_frames);
        let x = mats[0].select_rows(&train).unwrap();
        let pool = mats[1].select_rows(&train).unwrap();
        let y = gather_targets(&match_frames(&x, &pool, 1).unwrap(), &pool, 1).unwrap();
        let utts = class_pair_utterances(&truth, &test);
        for (i, &(kind, bias)) in kinds.iter().enumerate() {
            let map = fit(&x, &y, kind, bias).expect("fit");
            scores[i].push(
                utterance_speaker_score(&mats[0], &truth, 1, &utts, |u| apply(&map, u)).unwrap(),
            );
        }
    }
    let means: Vec<f64> = scores.iter().map(|v| mean(v)).collect();
    let ci_bias = bootstrap_ci(&scores[0], 7);
    let ci_orth = bootstrap_ci(&scores[1], 8);
    let pass = means[0] < means[1] && ci_bias.1 < ci_orth.0 && means[1] <= means[2];
    outcome(
        pass,
        format!(
            "bias_only {:.4} [{:.4}, {:.4}] < orthogonal {:.4} [{:.4}, {:.4}] <= unconstrained {:.4}",
            means[0], ci_bias.0, ci_bias.1, means[1], ci_orth.0, ci_orth.1, means[2]
        ),
    )
}

fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => (levenshtein(ra, rb) + usize::from(x != y))
            .min(levenshtein(ra, b) + 1)
            .min(levenshtein(a, rb) + 1),
    }
}

fn brute_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut ts: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(f64::INFINITY);
    let mut prev = (1.0, 0.0);
    for t in ts {
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        if frr == far {
            return far;
        }
        if frr > far {
            let lam = (prev.0 - prev.1) / ((prev.0 - prev.1) - (far - frr));
            return prev.0 + lam * (far - prev.0);
        }
        prev = (far, frr);
    }
    unreachable!()
}

fn metric_exactness() -> Outcome {
    let mut failures = Vec::new();
    let examples: [(&[f64], &[f64], f64); 3] = [
        (&[1.0, 1.0], &[0.0, 0.0], 0.0),
        (&[0.2, 0.5, 0.7], &[0.2, 0.5, 0.7], 0.5),
        (&[0.9, 0.8, 0.2], &[0.7, 0.1, 0.05], 1.0 / 3.0),
    ];
    for (g, i, want) in examples {
        let got = eer(&ScoreSet::new(g.to_vec(), i.to_vec()).unwrap());
        if got != brute_eer(g, i) || (got - want).abs() > 1e-15 {
            failures.push(format!("eer example {want}: got {got}"));
        }
    }

    let mut r = rng(105);
    let words = ["a", "b", "c", "d"];
    let mut wer_mismatch = 0;
    for _ in 0..1000 {
        let lr = r.random_range(1..=8);
        let lh = r.random_range(0..=8);
        let rt: Vec<u8> = (0..lr).map(|_| r.random_range(0..4)).collect();
        let ht: Vec<u8> = (0..lh).map(|_| r.random_range(0..4)).collect();
        let text = |t: &[u8]| {
            t.iter()
                .map(|&i| words[i as usize])
                .collect::<Vec<_>>()
                .join(" ")
        };
        let got = wer(&text(&rt), &text(&ht), Unit::Word).unwrap();
        let want = levenshtein(&rt, &ht) as f64 / lr as f64;
        if got != want || edit_distance(&rt, &ht) != levenshtein(&rt, &ht) {
            wer_mismatch += 1;
        }
    }
    if wer_mismatch > 0 {
        failures.push(format!("{wer_mismatch}/1000 wer mismatches"));
    }

    let mut affine_mismatch = 0;
    for _ in 0..500 {
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            let n = r.random_range(1..=15);
            (0..n)
                .map(|_| f64::from(r.random_range(-40i32..=40)) / 16.0)
                .collect::<Vec<f64>>()
        };
        let (g, i) = (draw(&mut r), draw(&mut r));
        let slope = 2f64.powi(r.random_range(-6..=6));
        let shift = f64::from(r.random_range(-50i32..=50));
        let f = |v: &[f64]| v.iter().map(|x| x * slope + shift).collect::<Vec<_>>();
        let base = eer(&ScoreSet::new(g.clone(), i.clone()).unwrap());
        let scaled = eer(&ScoreSet::new(f(&g), f(&i)).unwrap());
        if base != scaled || base != brute_eer(&g, &i) {
            affine_mismatch += 1;
        }
    }
    if affine_mismatch > 0 {
        failures.push(format!("{affine_mismatch}/500 affine-rescaling mismatches"));
    }
    let detail = if failures.is_empty() {
        "3 eer examples, 1000 wer instances, 500 rescaled eer instances exact".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn exhaustive(source: &FeatureMatrix, target: &FeatureMatrix, k: usize) -> Vec<usize> {
    let row = |m: &FeatureMatrix, i: usize| m.row(i).iter().copied().collect::<Vec<f64>>();
    let t: Vec<Vec<f64>> = (0..target.rows()).map(|j| row(target, j)).collect();
    let mut out = Vec::with_capacity(source.rows() * k);
    for i in 0..source.rows() {
        let a = row(source, i);
        let mut all: Vec<(f64, usize)> = t
            .iter()
            .enumerate()
            .map(|(j, b)| (cosine_distance(&a, b).unwrap(), j))
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        out.extend(all.into_iter().take(k).map(|(_, j)| j));
    }
    out
}

fn matching_oracle() -> Outcome {
    let pools: Vec<rayon::ThreadPool> = [1, 2, 8]
        .iter()
        .map(|&n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
        })
        .collect();
    let mut r = rng(106);
    let (mut wrong, mut nondet) = (0, 0);
    for i in 0..100 {
        let d = r.random_range(1..=64);
        let n = r.random_range(1..=500);
        let m = r.random_range(1..=500);
        let k = r.random_range(1..=m.min(4));
        let (s, t) = if i % 4 == 0 {
            // small integer grid: many exact ties
            let grid = |r: &mut rand_chacha::ChaCha8Rng, rows: usize| {
                let v: Vec<f64> = (0..rows * d)
                    .map(|_| f64::from(r.random_range(-1i32..=1)))
                    .collect();
                FeatureMatrix::from_row_slice(rows, d, &v).unwrap()
            };
            (grid(&mut r, n), grid(&mut r, m))
        } else {
            (features(&mut r, n, d), features(&mut r, m, d))
        };
        let runs: Vec<_> = pools
            .iter()
            .map(|p| p.install(|| match_frames(&s, &t, k).unwrap()))
            .collect();
        if runs[0].target_indices != exhaustive(&s, &t, k) {
            wrong += 1;
        }
        if runs.iter().any(|p| p != &runs[0]) {
            nondet += 1;
        }
    }
    outcome(
        wrong == 0 && nondet == 0,
        format!(
            "{wrong}/100 differ from exhaustive scan, {nondet}/100 differ across 1/2/8 threads"
        ),
    )
}

fn format_checks() -> Outcome {
    let mut failures = Vec::new();
    let mut r = rng(107);
    for _ in 0..200 {
        let (rows, cols) = (r.random_range(1..=40), r.random_range(1..=40));
        let vals: Vec<f64> = (0..rows * cols)
            .map(|_| {
                let v = f32::from_bits(r.random::<u32>());
                if v.is_finite() {
                    f64::from(v)
                } else {
                    0.5
                }
            })
            .collect();
        let m = FeatureMatrix::from_row_slice(rows, cols, &vals).unwrap();
        let bytes = lvcf::encode(&m).unwrap();
        let back = lvcf::decode(&bytes).unwrap();
        let bitwise = back
            .to_row_major()
            .iter()
            .zip(&vals)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !bitwise || lvcf::encode(&back).unwrap() != bytes {
            failures.push("round trip not bitwise".to_string());
            break;
        }
    }

    let good =
        lvcf::encode(&FeatureMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
    let corrupt = |at: usize, bytes: &[u8]| {
        let mut b = good.clone();
        b[at..at + bytes.len()].copy_from_slice(bytes);
        b
    };
    let cases = [
        ("magic", corrupt(0, b"LVCG"), 0),
        ("version", corrupt(4, &[2]), 4),
        ("dtype", corrupt(5, &[2]), 5),
        ("reserved", corrupt(6, &[1]), 6),
        ("reserved", corrupt(7, &[1]), 7),
        ("zero rows", corrupt(8, &0u64.to_le_bytes()), 8),
        ("zero cols", corrupt(16, &0u64.to_le_bytes()), 16),
        (
            "NaN payload",
            corrupt(24 + 4 * 2, &f32::NAN.to_le_bytes()),
            32,
        ),
        (
            "inf payload",
            corrupt(24 + 4 * 3, &f32::INFINITY.to_le_bytes()),
            36,
        ),
    ];
    for (name, bytes, want) in cases {
        match lvcf::decode(&bytes) {
            Err(Error::Format { offset, .. }) if offset == want => {}
            other => failures.push(format!("{name}: {other:?}")),
        }
    }
    for (name, bytes) in [
        ("truncated payload", good[..good.len() - 1].to_vec()),
        ("trailing bytes", [good.clone(), vec![0]].concat()),
        ("short header", good[..10].to_vec()),
    ] {
        if !matches!(lvcf::decode(&bytes), Err(Error::Length { .. })) {
            failures.push(format!("{name} accepted"));
        }
    }
    let nan = DMatrix::from_element(1, 1, f64::NAN);
    if !matches!(FeatureMatrix::new(nan), Err(Error::NonFinite { .. })) {
        failures.push("NaN matrix constructed".into());
    }
    let huge = FeatureMatrix::from_row_slice(1, 1, &[1e300]).unwrap();
    if lvcf::encode(&huge).is_ok() {
        failures.push("f32 overflow encoded".into());
    }
    let detail = if failures.is_empty() {
        "200 bitwise round trips, 9 corrupt headers/payloads at correct offsets, 3 length errors, NaN rejected"
            .to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("least-squares contract", least_squares),
        ("procrustes recovery", procrustes_recovery),
        ("hypothesis-class nesting", nesting),
        ("factorization eckart-young", eckart_young),
        ("planted-factor conversion", planted_conversion),
        ("rank trend", rank_trend),
        ("map-family trend", family_trend),
        ("metric exactness", metric_exactness),
        ("matching oracle", matching_oracle),
        ("format", format_checks),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swp_core::features::{compute_vpd, label_stress, Feature, StressClass};
use swp_core::forest::experiment::{fit_final, run_experiment, ModelConfig, Variant};
use swp_core::forest::importance::{impurity_importance, ranking};
use swp_core::forest::metrics::{eval_classification, eval_regression};
use swp_core::forest::partition::{split_indices, DEFAULT_FRACTIONS};
use swp_core::forest::pdp::partial_dependence;
use swp_core::forest::{Matrix, Task};
use swp_core::pipeline::{run_pipeline, RunConfig};
use swp_core::raster::Histogram;
use swp_core::segmentation::{build_canopy_mask, otsu_histogram, otsu_threshold};
use swp_core::synthetic::{generate_scene, planted_samples, write_orchard, PlantedFunction, SceneConfig};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// 1 ------------------------------------------------------------------------

fn vpd_reproduction() -> Outcome {
    let rows = [
        (90.55, 31.5, 3.355),
        (90.80, 32.5, 3.332),
        (83.30, 58.5, 1.615),
        (90.20, 28.7, 3.455),
        (89.54, 49.3, 2.404),
    ];
    let mut worst: f64 = 0.0;
    for (t, h, want) in rows {
        let got = compute_vpd(t, h).map_err(err)?;
        worst = worst.max((got - want).abs());
        ensure(
            (got - want).abs() <= 0.005,
            format!("{t} F / {h}%: {got:.4} kPa vs {want} kPa"),
        )?;
    }
    Ok(format!("5/5 rows within 0.005 kPa (worst {worst:.4})"))
}

// 2 ------------------------------------------------------------------------

fn oracle_regression(pred: &[f64], truth: &[f64]) -> (Option<f64>, f64, f64, f64) {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    let mut abs = 0.0;
    for i in 0..truth.len() {
        sse += (truth[i] - pred[i]).powi(2);
        sst += (truth[i] - mean).powi(2);
        abs += (truth[i] - pred[i]).abs();
    }
    let ratio = if sst == 0.0 { None } else { Some(sse / sst) };
    (ratio.map(|r| 1.0 - r), ratio.unwrap_or(f64::NAN), (sse / n).sqrt(), abs / n)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn oracle_argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

fn oracle_auc(probs: &[Vec<f64>], truth: &[usize], class: usize) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, pi) in probs.iter().enumerate() {
        if truth[i] != class {
            continue;
        }
        for (j, pj) in probs.iter().enumerate() {
            if truth[j] == class {
                continue;
            }
            pairs += 1.0;
            if pi[class] > pj[class] {
                wins += 1.0;
            } else if pi[class] == pj[class] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let n = rng.random_range(1..=50);

        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..0.0)).collect();
        let pred: Vec<f64> = truth
            .iter()
            .map(|t| t + rng.random_range(-3.0..3.0))
            .collect();
        let m = eval_regression(&pred, &truth).map_err(err)?;
        let (r2, ratio, rmse, mae) = oracle_regression(&pred, &truth);
        match (m.r2, r2) {
            (None, None) => {}
            // R^2 = 1 - SSres/SStot; the ratio is the well-conditioned quantity
            (Some(a), Some(_)) => ensure(
                rel_close(1.0 - a, ratio, 1e-12),
                format!("case {case}: R2 {a} vs {r2:?}"),
            )?,
            (a, b) => return Err(format!("case {case}: R2 definedness {a:?} vs {b:?}")),
        }
        ensure(rel_close(m.rmse, rmse, 1e-12), format!("case {case}: RMSE {} vs {rmse}", m.rmse))?;
        ensure(rel_close(m.mae, mae, 1e-12), format!("case {case}: MAE {} vs {mae}", m.mae))?;

        // small integer weights make tied scores common
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| loop {
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(0..4) as f64).collect();
                let s: f64 = w.iter().sum();
                if s > 0.0 {
                    break w.iter().map(|v| v / s).collect();
                }
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let c = eval_classification(&probs, &labels, 3).map_err(err)?;
        let mut confusion = vec![vec![0usize; 3]; 3];
        let mut correct = 0;
        for (p, &t) in probs.iter().zip(&labels) {
            let k = oracle_argmax(p);
            confusion[t][k] += 1;
            correct += usize::from(k == t);
        }
        ensure(c.confusion == confusion, format!("case {case}: confusion"))?;
        ensure(
            c.accuracy == correct as f64 / n as f64,
            format!("case {case}: accuracy {} vs {correct}/{n}", c.accuracy),
        )?;
        let per_class: Vec<Option<f64>> = (0..3).map(|k| oracle_auc(&probs, &labels, k)).collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        match (c.auc, macro_auc) {
            (None, None) => {}
            (Some(a), Some(b)) => ensure((a - b).abs() <= 1e-9, format!("case {case}: AUC {a} vs {b}"))?,
            (a, b) => return Err(format!("case {case}: AUC definedness {a:?} vs {b:?}")),
        }
    }
    Ok("1000 random cases agree (regression 1e-12 relative, counts exact, AUC 1e-9)".into())
}

// 3 ------------------------------------------------------------------------

/// Exhaustive search in exact rationals. With bin centres `c_i` the
/// between-class variance is `w0 * w1 * (mu0 - mu1)^2`; centres are an affine
/// image of bin indices, so comparing `(S0*n1 - S1*n0)^2 / (n0*n1)` over
/// integer index sums ranks candidates identically.
fn oracle_otsu(counts: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u128, u128)> = None;
    for k in 1..counts.len() {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for (i, &c) in counts.iter().enumerate() {
            if i < k {
                n0 += c as u128;
                s0 += i as u128 * c as u128;
            } else {
                n1 += c as u128;
                s1 += i as u128 * c as u128;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (s0 * n1).abs_diff(s1 * n0);
        let (num, den) = (d * d, n0 * n1);
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((k, num, den));
        }
    }
    best.map(|b| b.0)
}

fn otsu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let bins = rng.random_range(2..=256usize);
        let mut counts: Vec<u64> = (0..bins)
            .map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(0..300) })
            .collect();
        if case % 4 == 0 {
            // mirror-symmetric histograms produce exact ties
            for i in 0..bins / 2 {
                counts[bins - 1 - i] = counts[i];
            }
        }
        counts[0] += 1;
        counts[bins - 1] += 1;
        let edges: Vec<f64> = (0..=bins).map(|k| k as f64).collect();
        let want = oracle_otsu(&counts).ok_or("oracle found no split")? as f64;

        let hist = Histogram { edges, counts: counts.clone() };
        let got = otsu_histogram(&hist).map_err(err)?;
        ensure(got == want, format!("case {case}: histogram threshold {got} vs {want}"))?;

        // the same histogram as pixel values: bin i holds i + 0.5, plus the
        // extremes 0 and `bins` that pin the range to unit-width bins
        let mut values = vec![0.0f32, bins as f32];
        for (i, &c) in counts.iter().enumerate() {
            let extra = u64::from(i == 0) + u64::from(i == bins - 1);
            values.extend(std::iter::repeat_n(i as f32 + 0.5, (c - extra) as usize));
        }
        let got = otsu_threshold(&values, bins).map_err(err)?.threshold;
        ensure(got == want, format!("case {case}: value threshold {got} vs {want}"))?;
    }
    Ok("200 random histograms match exhaustive search exactly".into())
}

// 4 ------------------------------------------------------------------------

fn segmentation_recovery() -> Outcome {
    let config = SceneConfig::default();
    let date = config.dates[1];
    let scene = generate_scene(&config, date).map_err(err)?;
    let seg = build_canopy_mask(&scene.raster).map_err(err)?;
    let iou = seg.mask.iou(&scene.truth).map_err(err)?;
    ensure(iou >= 0.99, format!("IoU {iou:.5} < 0.99"))?;

    let quiet = SceneConfig {
        noise_std: 0.0,
        dsm_noise_std: 0.0,
        thermal_noise_std: 0.0,
        ..config
    };
    let scene = generate_scene(&quiet, date).map_err(err)?;
    let seg = build_canopy_mask(&scene.raster).map_err(err)?;
    let shadow = scene.shadow.count();
    let flagged = seg
        .mask
        .flags()
        .iter()
        .zip(scene.shadow.flags())
        .filter(|(m, s)| **m && **s)
        .count();
    ensure(shadow > 0, "noiseless scene has no shadow pixels")?;
    ensure(flagged == 0, format!("{flagged} of {shadow} shadow pixels flagged canopy"))?;
    Ok(format!(
        "IoU {iou:.5} with noise; 0 of {shadow} shadow pixels flagged in the noiseless scene"
    ))
}

// 5, 6, 10 -----------------------------------------------------------------

struct Orchard {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn orchard() -> Result<Orchard, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path().to_path_buf();
    write_orchard(&SceneConfig::default(), &root.join("orchard")).map_err(err)?;
    Ok(Orchard { _dir: dir, root })
}

fn pipeline(o: &Orchard, out: &str, task: &str) -> Result<RunConfig, String> {
    let overrides = [
        ("task".to_string(), task.to_string()),
        ("variant".to_string(), "full".to_string()),
        ("trees".to_string(), "500".to_string()),
        ("reps".to_string(), "10".to_string()),
        ("out".to_string(), o.root.join(out).display().to_string()),
    ];
    let config = RunConfig::load(Some(&o.root.join("orchard/run.cfg")), &overrides).map_err(err)?;
    run_pipeline(&config).map_err(err)?;
    Ok(config)
}

/// `mean` row of reports/eval.csv as metric -> value.
fn eval_means(config: &RunConfig) -> Result<BTreeMap<String, f64>, String> {
    let text = std::fs::read_to_string(config.out.join("reports/eval.csv")).map_err(err)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty eval.csv")?.split(',').collect();
    let reps = text.lines().filter(|l| l.starts_with("rep")).count();
    ensure(reps == 10, format!("{reps} repetition rows"))?;
    let mean = lines.find(|l| l.starts_with("mean,")).ok_or("no mean row")?;
    Ok(header
        .iter()
        .zip(mean.split(','))
        .skip(1)
        .map(|(k, v)| (k.to_string(), v.parse().unwrap_or(f64::NAN)))
        .collect())
}

fn dataset_rows(config: &RunConfig) -> Result<usize, String> {
    let text = std::fs::read_to_string(config.out.join("dataset.csv")).map_err(err)?;
    Ok(text.lines().count() - 1)
}

fn end_to_end_regression(o: &Orchard) -> Outcome {
    let config = pipeline(o, "regression", "regression")?;
    let n = dataset_rows(&config)?;
    ensure(n == 200, format!("dataset has {n} samples, expected 200"))?;
    let r2 = eval_means(&config)?["r2"];
    ensure(r2 >= 0.6, format!("mean test R2 {r2:.4} < 0.6"))?;
    Ok(format!("200 samples, 500 trees, 10 reps: mean test R2 {r2:.4}"))
}

fn end_to_end_classification(o: &Orchard) -> Outcome {
    let config = pipeline(o, "classification", "classification")?;
    let m = eval_means(&config)?;
    let (acc, auc) = (m["accuracy"], m["auc"]);
    ensure(acc >= 0.8, format!("mean accuracy {acc:.4} < 0.80"))?;
    ensure(auc >= 0.8, format!("mean macro AUC {auc:.4} < 0.80"))?;
    Ok(format!("mean test accuracy {acc:.4}, macro AUC {auc:.4}"))
}

fn snapshot(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(err)?;
                files.insert(path.strip_prefix(root).map_err(err)?.to_path_buf(), bytes);
            }
        }
    }
    Ok(files)
}

fn determinism(o: &Orchard) -> Outcome {
    let first = pipeline(o, "repeat-a", "regression")?;
    let second = pipeline(o, "repeat-b", "regression")?;
    let a = snapshot(&first.out)?;
    let b = snapshot(&second.out)?;
    ensure(
        a.contains_key(Path::new("models/final.forest")),
        "no serialized forest written",
    )?;
    for (path, bytes) in &a {
        ensure(
            b.get(path) == Some(bytes),
            format!("{} differs between runs", path.display()),
        )?;
    }
    ensure(a.len() == b.len(), "runs wrote different file sets")?;

    let dir = tempfile::tempdir().map_err(err)?;
    write_orchard(&SceneConfig::default(), &dir.path().join("again")).map_err(err)?;
    ensure(
        snapshot(&dir.path().join("again"))? == snapshot(&o.root.join("orchard"))?,
        "synthetic orchard differs between generations",
    )?;
    Ok(format!("{} output files byte-identical across two runs", a.len()))
}

// 7, 8, 9 ------------------------------------------------------------------

fn mean_r2(config: &SceneConfig, variant: Variant) -> Result<f64, String> {
    let samples = planted_samples(config).map_err(err)?;
    let mut model = ModelConfig::new(variant, Task::Regression);
    model.cv_folds = None;
    let report = run_experiment(&samples, &model, config.seed).map_err(err)?;
    report.mean_of("r2").ok_or_else(|| "no r2".to_string())
}

fn ablation() -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..10 {
        let config = SceneConfig {
            seed,
            ..SceneConfig::default()
        };
        let full = mean_r2(&config, Variant::Full)?;
        let reduced = mean_r2(&config, Variant::NoRedEdge)?;
        wins += usize::from(full >= reduced);
        detail.push(format!("{:+.3}", full - reduced));
    }
    ensure(wins >= 8, format!("Full >= NoRedEdge in only {wins}/10 seeds"))?;
    Ok(format!(
        "Full >= NoRedEdge in {wins}/10 seeds (R2 gaps {})",
        detail.join(" ")
    ))
}

fn importance_recovery() -> Outcome {
    let planted = PlantedFunction {
        intercept: -1.7,
        linear: [-2.0, 0.4, 0.5, -0.3, -0.2, -0.4, -0.6],
        thermal_vpd: -0.2,
    };
    let dominant = planted.dominant();
    let mut hits = 0;
    for seed in 0..10 {
        let config = SceneConfig {
            seed,
            planted,
            ..SceneConfig::default()
        };
        let samples = planted_samples(&config).map_err(err)?;
        let forest = fit_final(&samples, &ModelConfig::new(Variant::Full, Task::Regression), seed)
            .map_err(err)?;
        let scores = impurity_importance(&forest).map_err(err)?;
        hits += usize::from(ranking(&scores)[0] == dominant.index());
    }
    ensure(hits >= 9, format!("{dominant} ranked first in only {hits}/10 seeds"))?;
    Ok(format!("planted dominant {dominant} ranked first in {hits}/10 seeds"))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn pdp_fidelity() -> Outcome {
    let terms = [
        (Feature::Thermal, -1.2),
        (Feature::Ndvi, 0.8),
        (Feature::Ndre, 0.8),
        (Feature::Psri, -0.6),
    ];
    let mut planted = PlantedFunction::additive(&terms);
    // centred well inside the clamp range so the response stays additive
    planted.intercept = -4.0;
    let config = SceneConfig {
        planted,
        ..SceneConfig::default()
    };
    let samples = planted_samples(&config).map_err(err)?;
    let model = ModelConfig::new(Variant::Full, Task::Regression);
    let forest = fit_final(&samples, &model, config.seed).map_err(err)?;
    let rows: Vec<[f64; Feature::COUNT]> = samples.iter().map(|s| s.features).collect();
    let x = Matrix::from_rows(&rows).map_err(err)?;
    let mut detail = Vec::new();
    for (feature, _) in terms {
        let curve = partial_dependence(&forest, &x, feature.as_str(), 20).map_err(err)?;
        let pdp: Vec<f64> = curve.mean_prediction.iter().map(|m| m[0]).collect();
        let planted: Vec<f64> = curve.grid.iter().map(|&g| planted.component(feature, g)).collect();
        let r = pearson(&pdp, &planted);
        ensure(
            r >= 0.95,
            format!("{feature}: correlation {r:.4} < 0.95 over {} points", curve.grid.len()),
        )?;
        detail.push(format!("{feature} {r:.3}"));
    }
    Ok(format!("PDP vs planted component correlation: {}", detail.join(", ")))
}

// 11, 12 -------------------------------------------------------------------

fn split_arithmetic() -> Outcome {
    for seed in [0, 1, 42, u64::MAX] {
        let s = split_indices(200, DEFAULT_FRACTIONS, seed).map_err(err)?;
        let sizes = (s.train.len(), s.validation.len(), s.test.len());
        ensure(sizes == (160, 20, 20), format!("seed {seed}: sizes {sizes:?}"))?;
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        ensure(
            all == (0..200).collect::<Vec<_>>(),
            format!("seed {seed}: slices are not a disjoint cover of 0..200"),
        )?;
        ensure(
            split_indices(200, DEFAULT_FRACTIONS, seed).map_err(err)? == s,
            format!("seed {seed}: split not stable"),
        )?;
    }
    Ok("n = 200 -> (160, 20, 20), disjoint, exhaustive, seed-stable".into())
}

fn stress_boundaries() -> Outcome {
    ensure(label_stress(-0.4).map_err(err)? == StressClass::Low, "-0.4 is not Low")?;
    ensure(label_stress(-3.0).map_err(err)? == StressClass::Severe, "-3.0 is not Severe")?;
    let mut previous = StressClass::Low;
    for i in 0..10_000 {
        // 0 down to -10 bars
        let swp = -10.0 * i as f64 / 9_999.0;
        let class = label_stress(swp).map_err(err)?;
        let expected = if swp >= -0.4 {
            StressClass::Low
        } else if swp <= -3.0 {
            StressClass::Severe
        } else {
            StressClass::Moderate
        };
        ensure(class == expected, format!("{swp}: {class} vs {expected}"))?;
        ensure(class >= previous, format!("{swp}: class decreased"))?;
        previous = class;
    }
    Ok("boundaries inclusive; 10 000-point sweep is a monotone three-way partition".into())
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, budget: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, budget) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:.2?}, budget {limit:?}"));
            }
        }
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        failures += usize::from(outcome.is_err());
        println!("{status} criterion {id:>2} {name}: {detail} [{elapsed:.2?}]");
    };
    let secs = |s| Some(Duration::from_secs(s));

    report(1, "VPD reproduction", secs(1), &mut vpd_reproduction);
    report(2, "metric oracle equivalence", secs(10), &mut metric_oracles);
    report(3, "Otsu oracle", secs(5), &mut otsu_oracle);
    report(4, "segmentation recovery", secs(10), &mut segmentation_recovery);
    match orchard() {
        Ok(o) => {
            report(5, "end-to-end regression", secs(60), &mut || end_to_end_regression(&o));
            report(6, "end-to-end classification", secs(60), &mut || end_to_end_classification(&o));
            report(10, "determinism", None, &mut || determinism(&o));
        }
        Err(e) => {
            for (id, name) in [(5, "end-to-end regression"), (6, "end-to-end classification"), (10, "determinism")] {
                report(id, name, None, &mut || Err(format!("synthetic orchard: {e}")));
            }
        }
    }
    report(7, "ablation direction", None, &mut ablation);
    report(8, "importance recovery", None, &mut importance_recovery);
    report(9, "PDP fidelity", None, &mut pdp_fidelity);
    report(11, "split arithmetic", None, &mut split_arithmetic);
    report(12, "stress boundary semantics", None, &mut stress_boundaries);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria passed");
}

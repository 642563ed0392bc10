//! Repeated split-train-test experiments with a k-fold cross-check.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::features::{Feature, Sample, StressClass};
use crate::rng::{derive_seed, label};

use super::metrics::{eval_classification, eval_regression, ClassificationMetrics, RegressionMetrics};
use super::partition::{kfold_indices, split_indices, DEFAULT_FRACTIONS};
use super::{train_forest, Forest, Hyperparams, Matrix, Prediction, Targets, Task};

/// Which predictors a model sees, and on which samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    /// All seven canonical features.
    Full,
    /// Without the red-edge indices (NDRE, PSRI).
    NoRedEdge,
    /// One flight date; weather is constant within a date so only image features.
    SingleDate(NaiveDate),
    /// An explicit feature subset, kept in canonical order.
    Custom(Vec<Feature>),
}

impl Variant {
    pub fn features(&self) -> Vec<Feature> {
        use Feature::*;
        match self {
            Variant::Full => Feature::ALL.to_vec(),
            Variant::NoRedEdge => vec![Thermal, Ndvi, AirTempF, VpdKpa, WindMph],
            Variant::SingleDate(_) => vec![Thermal, Ndvi, Ndre, Psri],
            Variant::Custom(f) => {
                let mut f = f.clone();
                f.sort();
                f.dedup();
                f
            }
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().iter().map(|f| f.as_str().to_string()).collect()
    }

    /// Samples this variant is trained and tested on.
    pub fn select<'a>(&self, samples: &'a [Sample]) -> Vec<&'a Sample> {
        match self {
            Variant::SingleDate(d) => samples.iter().filter(|s| s.date == *d).collect(),
            _ => samples.iter().collect(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Full => f.write_str("full"),
            Variant::NoRedEdge => f.write_str("norededge"),
            Variant::SingleDate(d) => write!(f, "single-date:{d}"),
            Variant::Custom(_) => write!(f, "features:{}", self.feature_names().join(",")),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(date) = s.strip_prefix("single-date:") {
            let d = date
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad date in variant {s:?}")))?;
            return Ok(Variant::SingleDate(d));
        }
        if let Some(list) = s.strip_prefix("features:") {
            let features = list
                .split(',')
                .map(|f| f.trim().parse::<Feature>())
                .collect::<Result<Vec<_>>>()?;
            if features.is_empty() {
                return Err(Error::InvalidArgument("empty feature list".into()));
            }
            return Ok(Variant::Custom(features));
        }
        match s {
            "full" => Ok(Variant::Full),
            "norededge" => Ok(Variant::NoRedEdge),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub task: Task,
    pub hyperparams: Hyperparams,
    pub repetitions: usize,
    /// Folds for the cross-validation pass; `None` skips it.
    pub cv_folds: Option<usize>,
}

impl ModelConfig {
    pub fn new(variant: Variant, task: Task) -> Self {
        ModelConfig {
            variant,
            task,
            hyperparams: Hyperparams::defaults(task),
            repetitions: 10,
            cv_folds: Some(10),
        }
    }
}

/// Feature matrix and targets for the variant's samples.
pub fn design(samples: &[&Sample], features: &[Feature], task: Task) -> Result<(Matrix, Targets)> {
    let p = features.len();
    let mut data = Vec::with_capacity(samples.len() * p);
    for s in samples {
        data.extend(features.iter().map(|f| s.feature(*f)));
    }
    let x = Matrix::new(p, data)?;
    let targets = match task {
        Task::Regression => Targets::Regression(samples.iter().map(|s| s.swp_bars).collect()),
        Task::Classification => Targets::Classification {
            labels: samples.iter().map(|s| s.stress.index()).collect(),
            n_classes: StressClass::ALL.len(),
        },
    };
    Ok((x, targets))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metrics {
    Regression(RegressionMetrics),
    Classification(ClassificationMetrics),
}

impl Metrics {
    /// Scalar metrics in column order; `None` where undefined.
    pub fn scalars(&self) -> Vec<Option<f64>> {
        match self {
            Metrics::Regression(m) => vec![m.r2, Some(m.rmse), Some(m.mae)],
            Metrics::Classification(m) => {
                let mut v = vec![Some(m.accuracy), m.auc];
                v.extend(m.confusion.iter().flatten().map(|&c| Some(c as f64)));
                v
            }
        }
    }

    pub fn r2(&self) -> Option<f64> {
        match self {
            Metrics::Regression(m) => m.r2,
            Metrics::Classification(_) => None,
        }
    }
}

pub fn metric_names(task: Task) -> Vec<String> {
    match task {
        Task::Regression => vec!["r2".into(), "rmse".into(), "mae".into()],
        Task::Classification => {
            let mut v = vec!["accuracy".to_string(), "auc".to_string()];
            for t in StressClass::ALL {
                for p in StressClass::ALL {
                    v.push(format!("true_{t}_pred_{p}"));
                }
            }
            v
        }
    }
}

pub fn evaluate(forest: &Forest, x: &Matrix, targets: &Targets) -> Result<Metrics> {
    let predictions = forest.predict_rows(x)?;
    match targets {
        Targets::Regression(y) => {
            let values: Vec<f64> = predictions.iter().filter_map(Prediction::value).collect();
            Ok(Metrics::Regression(eval_regression(&values, y)?))
        }
        Targets::Classification { labels, n_classes } => {
            let probs: Vec<Vec<f64>> = predictions
                .into_iter()
                .map(|p| match p {
                    Prediction::Probabilities(p) => p,
                    Prediction::Value(_) => unreachable!("regression forest on class targets"),
                })
                .collect();
            Ok(Metrics::Classification(eval_classification(&probs, labels, *n_classes)?))
        }
    }
}

/// Mean and sample standard deviation (n - 1) of the defined values.
pub fn mean_std(values: &[Option<f64>]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        f64::NAN
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub variant: Variant,
    pub features: Vec<String>,
    pub n_samples: usize,
    pub repetitions: Vec<Metrics>,
    pub cv_folds: Vec<Metrics>,
}

impl EvalReport {
    pub fn metric_names(&self) -> Vec<String> {
        metric_names(self.task)
    }

    fn column(rows: &[Metrics], k: usize) -> Vec<Option<f64>> {
        rows.iter().map(|m| m.scalars()[k]).collect()
    }

    /// `(mean, std)` per metric over the test-slice repetitions.
    pub fn summary(&self) -> Vec<(f64, f64)> {
        (0..self.metric_names().len())
            .map(|k| mean_std(&Self::column(&self.repetitions, k)))
            .collect()
    }

    /// `(mean, std)` per metric over the cross-validation folds.
    pub fn cv_summary(&self) -> Vec<(f64, f64)> {
        (0..self.metric_names().len())
            .map(|k| mean_std(&Self::column(&self.cv_folds, k)))
            .collect()
    }

    pub fn mean_of(&self, metric: &str) -> Option<f64> {
        let k = self.metric_names().iter().position(|m| m == metric)?;
        Some(self.summary()[k].0)
    }

    /// One row per repetition, then `mean`, `std`, and the CV `cv_mean`, `cv_std`.
    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or("NaN".to_string(), |x| x.to_string());
        let mut out = format!("row,{}\n", self.metric_names().join(","));
        for (i, m) in self.repetitions.iter().enumerate() {
            let cells: Vec<String> = m.scalars().into_iter().map(fmt_opt).collect();
            let _ = writeln!(out, "rep{},{}", i + 1, cells.join(","));
        }
        let mut agg = |name: &str, values: Vec<f64>| {
            let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{name},{}", cells.join(","));
        };
        let summary = self.summary();
        agg("mean", summary.iter().map(|s| s.0).collect());
        agg("std", summary.iter().map(|s| s.1).collect());
        if !self.cv_folds.is_empty() {
            let cv = self.cv_summary();
            agg("cv_mean", cv.iter().map(|s| s.0).collect());
            agg("cv_std", cv.iter().map(|s| s.1).collect());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: {}", self.task);
        let _ = writeln!(out, "variant: {}", self.variant);
        let _ = writeln!(out, "features: {}", self.features.join(", "));
        let _ = writeln!(out, "samples: {}", self.n_samples);
        let _ = writeln!(out, "repetitions: {}", self.repetitions.len());
        let names = self.metric_names();
        let shown = match self.task {
            Task::Regression => 3,
            Task::Classification => 2,
        };
        let _ = writeln!(out, "\ntest slice (mean +/- std):");
        for (name, (m, s)) in names.iter().zip(self.summary()).take(shown) {
            let _ = writeln!(out, "  {name:<9} {m:.4} (+/- {s:.4})");
        }
        if !self.cv_folds.is_empty() {
            let _ = writeln!(out, "\n{}-fold cross-validation (mean +/- std):", self.cv_folds.len());
            for (name, (m, s)) in names.iter().zip(self.cv_summary()).take(shown) {
                let _ = writeln!(out, "  {name:<9} {m:.4} (+/- {s:.4})");
            }
        }
        if self.task == Task::Classification {
            let mut total = [[0usize; 3]; 3];
            for m in &self.repetitions {
                if let Metrics::Classification(c) = m {
                    for (t, row) in c.confusion.iter().enumerate() {
                        for (p, v) in row.iter().enumerate() {
                            total[t][p] += v;
                        }
                    }
                }
            }
            let _ = writeln!(out, "\nconfusion over all test slices (rows true, cols predicted):");
            let _ = writeln!(out, "  {:>9} {:>9} {:>9} {:>9}", "", "low", "moderate", "severe");
            for (t, row) in total.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  {:>9} {:>9} {:>9} {:>9}",
                    StressClass::ALL[t].as_str(),
                    row[0],
                    row[1],
                    row[2]
                );
            }
        }
        out
    }
}

/// Seed of the forest trained in repetition `rep`.
pub fn repetition_seeds(master_seed: u64, rep: usize) -> (u64, u64) {
    (
        derive_seed(master_seed, &[label::SPLIT, rep as u64]),
        derive_seed(master_seed, &[label::FOREST, rep as u64]),
    )
}

pub fn run_experiment(samples: &[Sample], config: &ModelConfig, master_seed: u64) -> Result<EvalReport> {
    let selected = config.variant.select(samples);
    if selected.is_empty() {
        return Err(Error::Degenerate(format!("no samples for variant {}", config.variant)));
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be positive".into()));
    }
    let features = config.variant.features();
    let names = config.variant.feature_names();
    let (x, targets) = design(&selected, &features, config.task)?;
    let n = x.n_rows();

    let mut repetitions = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let (split_seed, forest_seed) = repetition_seeds(master_seed, rep);
        let split = split_indices(n, DEFAULT_FRACTIONS, split_seed)?;
        let forest = train_forest(
            &x.select_rows(&split.train),
            &targets.select(&split.train),
            &names,
            &config.hyperparams,
            forest_seed,
        )?;
        repetitions.push(evaluate(
            &forest,
            &x.select_rows(&split.test),
            &targets.select(&split.test),
        )?);
    }

    let mut cv_folds = Vec::new();
    if let Some(k) = config.cv_folds {
        let folds = kfold_indices(n, k, derive_seed(master_seed, &[label::CV]))?;
        for (f, fold) in folds.iter().enumerate() {
            let forest = train_forest(
                &x.select_rows(&fold.train),
                &targets.select(&fold.train),
                &names,
                &config.hyperparams,
                derive_seed(master_seed, &[label::CV, f as u64]),
            )?;
            cv_folds.push(evaluate(
                &forest,
                &x.select_rows(&fold.holdout),
                &targets.select(&fold.holdout),
            )?);
        }
    }

    Ok(EvalReport {
        task: config.task,
        variant: config.variant.clone(),
        features: names,
        n_samples: n,
        repetitions,
        cv_folds,
    })
}

/// Forest fitted on every sample of the variant, for importance, PDPs and maps.
pub fn fit_final(samples: &[Sample], config: &ModelConfig, master_seed: u64) -> Result<Forest> {
    let selected = config.variant.select(samples);
    let features = config.variant.features();
    let (x, targets) = design(&selected, &features, config.task)?;
    train_forest(
        &x,
        &targets,
        &config.variant.feature_names(),
        &config.hyperparams,
        derive_seed(master_seed, &[label::FINAL]),
    )
}

/// Columns of `features` picked out of a canonical feature vector.
pub fn project(features: &[f64; Feature::COUNT], names: &[String]) -> Result<Vec<f64>> {
    names
        .iter()
        .map(|n| Ok(features[n.parse::<Feature>()?.index()]))
        .collect()
}

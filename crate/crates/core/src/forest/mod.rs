//! Random forest regression and classification.
//!
//! Trees are standard CART grown on bootstrap resamples, with `mtry` features
//! drawn per node. Each tree owns a random stream derived from the forest
//! seed and its index, so training in parallel yields the same forest as
//! training sequentially.

pub mod experiment;
pub mod importance;
pub mod metrics;
pub mod model_io;
pub mod partition;
pub mod pdp;
mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use tree::{Leaf, Node, Tree};

use crate::error::{Error, Result};
use crate::rng::{label, stream};
use tree::{grow_tree, GrowParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if n_cols == 0 {
            return Err(Error::InvalidArgument("matrix needs at least one column".into()));
        }
        if !data.len().is_multiple_of(n_cols) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill rows of {n_cols}",
                data.len()
            )));
        }
        Ok(Matrix { n_cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.as_ref().len() != n_cols {
                return Err(Error::InvalidArgument("ragged rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Matrix::new(n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            n_cols: self.n_cols,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Classification { labels: Vec<usize>, n_classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(y) => y.len(),
            Targets::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Regression(_) => Task::Regression,
            Targets::Classification { .. } => Task::Classification,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Regression(y) => Targets::Regression(rows.iter().map(|&i| y[i]).collect()),
            Targets::Classification { labels, n_classes } => Targets::Classification {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per node; `None` picks the task default.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Hyperparams {
    pub fn defaults(task: Task) -> Self {
        Hyperparams {
            n_trees: 500,
            max_depth: None,
            min_leaf: match task {
                Task::Regression => 5,
                Task::Classification => 1,
            },
            mtry: None,
            bootstrap: true,
        }
    }

    /// `ceil(sqrt(p))` for classification, `max(1, floor(p/3))` for regression.
    pub fn resolved_mtry(&self, task: Task, n_features: usize) -> usize {
        let default = match task {
            Task::Classification => (n_features as f64).sqrt().ceil() as usize,
            Task::Regression => (n_features / 3).max(1),
        };
        self.mtry.unwrap_or(default).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub task: Task,
    /// Zero for regression.
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    /// Hyperparameters with `mtry` resolved.
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Value(f64),
    Probabilities(Vec<f64>),
}

impl Prediction {
    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::Probabilities(_) => None,
        }
    }

    /// Most probable class, ties to the lower index.
    pub fn class(&self) -> Option<usize> {
        match self {
            Prediction::Value(_) => None,
            Prediction::Probabilities(p) => Some(argmax(p)),
        }
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn train_forest(
    x: &Matrix,
    targets: &Targets,
    feature_names: &[String],
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<Forest> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 training rows, got {n}")));
    }
    if targets.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {n} rows",
            targets.len()
        )));
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    if x.data.iter().any(|v| v.is_nan()) {
        return Err(Error::Degenerate("training features contain NaN".into()));
    }
    if hyperparams.n_trees == 0 || hyperparams.min_leaf == 0 {
        return Err(Error::InvalidArgument("n_trees and min_leaf must be positive".into()));
    }
    let n_classes = match targets {
        Targets::Regression(y) => {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate("non-finite regression target".into()));
            }
            0
        }
        Targets::Classification { labels, n_classes } => {
            if let Some(bad) = labels.iter().find(|&&l| l >= *n_classes) {
                return Err(Error::InvalidArgument(format!(
                    "label {bad} out of range for {n_classes} classes"
                )));
            }
            let mut present = vec![false; *n_classes];
            labels.iter().for_each(|&l| present[l] = true);
            if present.iter().filter(|&&p| p).count() < 2 {
                return Err(Error::Degenerate(
                    "classification needs at least 2 classes present".into(),
                ));
            }
            *n_classes
        }
    };

    let task = targets.task();
    let mtry = hyperparams.resolved_mtry(task, x.n_cols());
    let params = GrowParams {
        max_depth: hyperparams.max_depth,
        min_leaf: hyperparams.min_leaf,
        mtry,
        bootstrap: hyperparams.bootstrap,
    };
    let trees = (0..hyperparams.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(x, targets, &params, stream(seed, &[label::TREE, t as u64])))
        .collect();

    Ok(Forest {
        task,
        n_classes,
        feature_names: feature_names.to_vec(),
        hyperparams: Hyperparams {
            mtry: Some(mtry),
            ..*hyperparams
        },
        seed,
        trees,
    })
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_features() {
            return Err(Error::InvalidArgument(format!(
                "feature vector has {} values, forest expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in feature vector".into()));
        }
        if self.trees.is_empty() {
            return Err(Error::Degenerate("forest has no trees".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let n = self.trees.len() as f64;
        match self.task {
            Task::Regression => {
                let sum: f64 = self
                    .trees
                    .iter()
                    .map(|t| match t.leaf_for(x) {
                        Leaf::Value(v) => *v,
                        Leaf::Counts(_) => unreachable!("classification leaf in regression tree"),
                    })
                    .sum();
                Prediction::Value(sum / n)
            }
            Task::Classification => {
                let mut votes = vec![0usize; self.n_classes];
                for t in &self.trees {
                    let class = t.leaf_for(x).majority().expect("classification leaf");
                    votes[class] += 1;
                }
                Prediction::Probabilities(votes.into_iter().map(|v| v as f64 / n).collect())
            }
        }
    }

    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

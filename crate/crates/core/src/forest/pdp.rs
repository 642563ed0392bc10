//! Partial dependence curves.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{Forest, Matrix, Prediction};

pub const DEFAULT_GRID_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PdpCurve {
    pub feature: String,
    /// Strictly increasing evaluation points.
    pub grid: Vec<f64>,
    /// Mean prediction per grid point: one value for regression, one per
    /// class for classification.
    pub mean_prediction: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantiles at `j / (grid_points - 1)`, deduplicated.
pub fn quantile_grid(values: &[f64], grid_points: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = (0..grid_points)
        .map(|j| quantile(&sorted, j as f64 / (grid_points - 1) as f64))
        .collect();
    grid.dedup();
    grid
}

pub fn partial_dependence(
    forest: &Forest,
    samples: &Matrix,
    feature: &str,
    grid_points: usize,
) -> Result<PdpCurve> {
    let column = forest.feature_index(feature)?;
    if samples.n_rows() == 0 {
        return Err(Error::InvalidArgument("partial dependence needs samples".into()));
    }
    if samples.n_cols() != forest.n_features() {
        return Err(Error::InvalidArgument(format!(
            "samples have {} columns, forest expects {}",
            samples.n_cols(),
            forest.n_features()
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    if samples.rows().flatten().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in samples".into()));
    }
    let values: Vec<f64> = samples.rows().map(|r| r[column]).collect();
    let grid = quantile_grid(&values, grid_points);

    let n = samples.n_rows() as f64;
    let mean_prediction = grid
        .par_iter()
        .map(|&g| {
            let mut acc: Vec<f64> = Vec::new();
            let mut row = vec![0.0; samples.n_cols()];
            for r in samples.rows() {
                row.copy_from_slice(r);
                row[column] = g;
                match forest.predict_unchecked(&row) {
                    Prediction::Value(v) => {
                        acc.resize(1, 0.0);
                        acc[0] += v;
                    }
                    Prediction::Probabilities(p) => {
                        acc.resize(p.len(), 0.0);
                        acc.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
                    }
                }
            }
            acc.into_iter().map(|a| a / n).collect()
        })
        .collect();
    Ok(PdpCurve {
        feature: feature.to_string(),
        grid,
        mean_prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Hyperparams, Leaf, Node, Task, Tree};

    #[test]
    fn grid_is_deduplicated_quantiles() {
        assert_eq!(quantile_grid(&[0.0, 1.0, 2.0, 3.0, 4.0], 5), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(quantile_grid(&[2.0, 2.0, 2.0], 20), vec![2.0]);
        let g = quantile_grid(&[0.0, 10.0], 3);
        assert_eq!(g, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn constant_forest_is_flat() {
        let f = Forest {
            task: Task::Regression,
            n_classes: 0,
            feature_names: vec!["a".into(), "b".into()],
            hyperparams: Hyperparams::defaults(Task::Regression),
            seed: 0,
            trees: vec![Tree { nodes: vec![Node::Leaf(Leaf::Value(-2.0))] }],
        };
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 2.0], [3.0, 0.5]]).unwrap();
        let c = partial_dependence(&f, &x, "a", 20).unwrap();
        assert_eq!(c.grid.len(), c.mean_prediction.len());
        assert!(c.grid.windows(2).all(|w| w[0] < w[1]));
        assert!(c.mean_prediction.iter().all(|m| m == &vec![-2.0]));
        assert!(matches!(partial_dependence(&f, &x, "zzz", 20), Err(Error::UnknownFeature(_))));
    }
}

//! Mean decrease in impurity.

use crate::error::{Error, Result};

use super::{Forest, Node};

/// Per-feature impurity decrease summed over every split, averaged over
/// trees and normalized to sum to one. All zeros when no tree splits.
pub fn impurity_importance(forest: &Forest) -> Result<Vec<f64>> {
    if forest.trees.is_empty() {
        return Err(Error::Degenerate("forest has no trees".into()));
    }
    let mut totals = vec![0.0; forest.n_features()];
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let Node::Split { feature, gain, .. } = node {
                totals[*feature] += gain;
            }
        }
    }
    let n_trees = forest.trees.len() as f64;
    totals.iter_mut().for_each(|t| *t /= n_trees);
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|t| *t /= sum);
    }
    Ok(totals)
}

/// Feature indices ordered by decreasing importance, ties by index.
pub fn ranking(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order
}

use crate::error::{Error, Result};

use super::argmax;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    /// `None` when the truths have zero variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
}

pub fn eval_regression(predictions: &[f64], truths: &[f64]) -> Result<RegressionMetrics> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let n = truths.len() as f64;
    let mean = truths.iter().sum::<f64>() / n;
    let (mut ss_res, mut ss_tot, mut abs) = (0.0, 0.0, 0.0);
    for (&p, &y) in predictions.iter().zip(truths) {
        ss_res += (y - p) * (y - p);
        ss_tot += (y - mean) * (y - mean);
        abs += (y - p).abs();
    }
    Ok(RegressionMetrics {
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        rmse: (ss_res / n).sqrt(),
        mae: abs / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    /// Macro one-vs-rest AUC over classes that have both positives and negatives.
    pub auc: Option<f64>,
    pub class_auc: Vec<Option<f64>>,
}

pub fn eval_classification(
    probabilities: &[Vec<f64>],
    truths: &[usize],
    n_classes: usize,
) -> Result<ClassificationMetrics> {
    if probabilities.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            probabilities.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    for (i, p) in probabilities.iter().enumerate() {
        if p.len() != n_classes {
            return Err(Error::InvalidArgument(format!(
                "row {i} has {} probabilities for {n_classes} classes",
                p.len()
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "row {i} probabilities sum to {sum}"
            )));
        }
    }
    if let Some(bad) = truths.iter().find(|&&t| t >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }

    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut correct = 0;
    for (p, &t) in probabilities.iter().zip(truths) {
        let predicted = argmax(p);
        confusion[t][predicted] += 1;
        correct += usize::from(predicted == t);
    }

    let class_auc: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
            let positive: Vec<bool> = truths.iter().map(|&t| t == c).collect();
            rank_auc(&scores, &positive)
        })
        .collect();
    let defined: Vec<f64> = class_auc.iter().flatten().copied().collect();
    let auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    Ok(ClassificationMetrics {
        accuracy: correct as f64 / truths.len() as f64,
        confusion,
        auc,
        class_auc,
    })
}

/// Mann-Whitney AUC with average ranks, so tied scores count one half.
pub fn rank_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        let m = eval_regression(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.r2, m.rmse, m.mae), (Some(1.0), 0.0, 0.0));

        let m = eval_regression(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.r2, Some(0.0));

        let m = eval_regression(&[2.0, 2.0, 0.0], &[0.0, 0.0, 2.0]).unwrap();
        assert!((m.r2.unwrap() - (-3.5)).abs() < 1e-12);
        assert!((m.rmse - 2.0).abs() < 1e-12);
        assert!((m.mae - 2.0).abs() < 1e-12);

        let m = eval_regression(&[1.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_eq!(m.r2, None);
        assert_eq!(m.mae, 1.0);

        assert!(eval_regression(&[], &[]).is_err());
        assert!(eval_regression(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        let probs = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let m = eval_classification(&probs, &[0, 1, 2], 3).unwrap();
        assert_eq!((m.accuracy, m.auc), (1.0, Some(1.0)));

        let flat = vec![vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]; 4];
        let m = eval_classification(&flat, &[0, 1, 2, 1], 3).unwrap();
        assert!(m.class_auc.iter().all(|a| *a == Some(0.5)));

        let probs = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.6, 0.3, 0.1],
            vec![0.1, 0.1, 0.8],
        ];
        let m = eval_classification(&probs, &[0, 1, 2], 3).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.confusion, vec![vec![1, 0, 0], vec![1, 0, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn absent_class_is_skipped() {
        let probs = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.7, 0.1]];
        let m = eval_classification(&probs, &[0, 1], 3).unwrap();
        assert_eq!(m.class_auc[2], None);
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn classification_rejects_unnormalized() {
        let probs = vec![vec![0.7, 0.2, 0.2]];
        assert!(eval_classification(&probs, &[0], 3).is_err());
        assert!(eval_classification(&[], &[], 3).is_err());
    }
}

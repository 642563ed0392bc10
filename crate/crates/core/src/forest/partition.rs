//! Train/validation/test splits and k-fold partitions.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{label, stream};

/// The 80/10/10 protocol.
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[label::SPLIT]));
    idx
}

/// Shuffles `0..n` and cuts it into train, validation and test slices.
///
/// Validation and test get `round(n * f)` rows each; train takes the rest.
pub fn split_indices(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let n_val = (n as f64 * fv).round() as usize;
    let n_test = (n as f64 * fs).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    if n_val == 0 || n_test == 0 || n_train == 0 || n_val + n_test >= n {
        return Err(Error::Degenerate(format!(
            "{n} samples cannot fill all three slices of a {fractions:?} split"
        )));
    }
    let idx = shuffled(n, seed);
    Ok(SplitIndices {
        train: idx[..n_train].to_vec(),
        validation: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    })
}

/// Splits owned copies of `samples`; see [`split_indices`].
pub fn split_dataset<T: Clone>(
    samples: &[T],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let s = split_indices(samples.len(), fractions, seed)?;
    let take = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<T>>();
    Ok((take(&s.train), take(&s.validation), take(&s.test)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// `k` folds over a shuffled `0..n`; the first `n % k` folds hold one extra index.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Degenerate(format!("{n} samples cannot fill {k} folds")));
    }
    let idx = shuffled(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let holdout = idx[start..start + len].to_vec();
        let train = idx[..start].iter().chain(&idx[start + len..]).copied().collect();
        folds.push(Fold { train, holdout });
        start += len;
    }
    Ok(folds)
}

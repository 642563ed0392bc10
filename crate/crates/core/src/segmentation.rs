//! Canopy segmentation: NExG greenness, Otsu thresholds, and the DSM ∧ NExG mask.

use std::fmt;

use crate::error::{Error, Result};
use crate::raster::{finite_range, BandName, CanopyMask, DerivedLayer, Histogram, Raster};

pub const DEFAULT_OTSU_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub band_or_index: String,
    pub threshold: f64,
    pub method: &'static str,
    /// Pixels `(below, at_or_above)` the threshold.
    pub class_counts: (usize, usize),
}

impl fmt::Display for ThresholdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "layer {}", self.band_or_index)?;
        writeln!(f, "method {}", self.method)?;
        writeln!(f, "threshold {}", self.threshold)?;
        writeln!(f, "below {}", self.class_counts.0)?;
        writeln!(f, "at_or_above {}", self.class_counts.1)
    }
}

/// Normalized excess green, `(2G - R - B) / (G + R + B)`.
///
/// The "Black" term of the classic formulation is the blue band here. Pixels
/// with a NaN operand or a zero denominator come out NaN.
pub fn compute_nexg(raster: &Raster) -> Result<Raster> {
    let green = raster.band(BandName::Green)?;
    let red = raster.band(BandName::Red)?;
    let blue = raster.band(BandName::Blue)?;
    let values = green
        .iter()
        .zip(red)
        .zip(blue)
        .map(|((&g, &r), &b)| {
            let (g, r, b) = (g as f64, r as f64, b as f64);
            let den = g + r + b;
            if den == 0.0 || den.is_nan() {
                f32::NAN
            } else {
                ((2.0 * g - r - b) / den) as f32
            }
        })
        .collect();
    Raster::single(*raster.geometry(), DerivedLayer::NExG, values)
}

/// Otsu's threshold over a `bin_count`-bin histogram of the finite values.
///
/// Candidates are the interior bin edges; the edge with maximal between-class
/// variance wins, with ties going to the lower edge. Non-finite inputs are
/// ignored.
pub fn otsu_threshold(values: &[f32], bin_count: usize) -> Result<ThresholdReport> {
    otsu_named(values, bin_count, "values")
}

fn otsu_named(values: &[f32], bin_count: usize, name: &str) -> Result<ThresholdReport> {
    if bin_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "otsu needs at least 2 bins, got {bin_count}"
        )));
    }
    let finite = values.iter().filter(|v| v.is_finite()).count();
    if finite < 2 {
        return Err(Error::Degenerate(format!(
            "{name}: otsu needs at least 2 finite values, got {finite}"
        )));
    }
    let (min, max) = finite_range(values).expect("finite values exist");
    if min >= max {
        return Err(Error::Degenerate(format!("{name}: constant input {min}")));
    }

    let threshold = otsu_histogram(&Histogram::from_values(values, bin_count)?)?;
    let at_or_above = values
        .iter()
        .filter(|v| v.is_finite() && **v as f64 >= threshold)
        .count();
    Ok(ThresholdReport {
        band_or_index: name.to_string(),
        threshold,
        method: "otsu",
        class_counts: (finite - at_or_above, at_or_above),
    })
}

/// `a * b` as a 192-bit big-endian triple.
fn mul_wide(a: u128, b: u64) -> [u64; 3] {
    let lo = (a as u64 as u128) * b as u128;
    let hi = (a >> 64) * b as u128;
    let mid = (lo >> 64) + (hi as u64 as u128);
    [((hi >> 64) + (mid >> 64)) as u64, mid as u64, lo as u64]
}

/// Otsu's threshold over a histogram: the interior edge maximizing the
/// between-class variance, ties to the lower edge.
pub fn otsu_histogram(hist: &Histogram) -> Result<f64> {
    let n_bins = hist.counts.len();
    if n_bins < 2 || hist.edges.len() != n_bins + 1 {
        return Err(Error::InvalidArgument(format!(
            "histogram needs at least 2 bins and one more edge than bins, got {} and {}",
            n_bins,
            hist.edges.len()
        )));
    }
    // Bin index stands in for the bin value: between-class variance is
    // invariant (up to scale) under the affine map to bin centers, so the
    // score (N*S0 - n0*S)^2 / (n0*n1) can be compared exactly in integers.
    let total = hist.total();
    let index_sum: u128 = hist.counts.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let (mut below, mut below_sum) = (0u64, 0u128);
    let mut best: Option<(usize, u128, u64)> = None;
    for k in 1..n_bins {
        below += hist.counts[k - 1];
        below_sum += (k as u128 - 1) * hist.counts[k - 1] as u128;
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        let diff = (total as u128 * below_sum).abs_diff(below as u128 * index_sum);
        let diff = u64::try_from(diff)
            .map_err(|_| Error::InvalidArgument("histogram too large for exact Otsu".into()))?;
        let num = diff as u128 * diff as u128;
        let den = below as u128 * above as u128;
        let den = u64::try_from(den)
            .map_err(|_| Error::InvalidArgument("histogram too large for exact Otsu".into()))?;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => mul_wide(num, bd) > mul_wide(bn, den),
        };
        if better {
            best = Some((k, num, den));
        }
    }
    let (edge, _, _) = best.ok_or_else(|| {
        Error::Degenerate("histogram has a single occupied side; no threshold splits it".into())
    })?;
    Ok(hist.edges[edge])
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: CanopyMask,
    pub dsm: ThresholdReport,
    pub nexg: ThresholdReport,
}

/// Flags a pixel as canopy when it is in the upper mode of both the DSM and
/// NExG. NaN in either layer excludes the pixel.
pub fn build_canopy_mask(raster: &Raster) -> Result<Segmentation> {
    let dsm = raster.band(BandName::Dsm)?;
    let nexg_raster = compute_nexg(raster)?;
    let nexg = nexg_raster.band(DerivedLayer::NExG)?;

    let dsm_report = otsu_named(dsm, DEFAULT_OTSU_BINS, BandName::Dsm.as_str())?;
    let nexg_report = otsu_named(nexg, DEFAULT_OTSU_BINS, DerivedLayer::NExG.as_str())?;

    let flags = classify(dsm, nexg, dsm_report.threshold, nexg_report.threshold);
    let mask = CanopyMask::new(raster.width(), raster.height(), flags)?;
    Ok(Segmentation {
        mask,
        dsm: dsm_report,
        nexg: nexg_report,
    })
}

/// Per-pixel AND of the two threshold tests, with NaN failing both.
pub fn classify(dsm: &[f32], nexg: &[f32], dsm_threshold: f64, nexg_threshold: f64) -> Vec<bool> {
    dsm.iter()
        .zip(nexg)
        .map(|(&d, &n)| (d as f64) >= dsm_threshold && (n as f64) >= nexg_threshold)
        .collect()
}

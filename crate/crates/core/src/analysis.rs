//! Consistency statistics over estimated lighting environments.
//!
//! Two studies are supported: comparing the normalized environments of two
//! image sets coefficient by coefficient ([`cross_set_report`]), and
//! comparing the raw environments of every pair of spheres inside the same
//! image ([`within_image_report`]).

use alloc::vec::Vec;

use crate::sh::{LightingEnv, NormalizedLighting, NUM_COEFFS};
use crate::{Error, Result};

/// Default quantile levels: lower bar, median, upper bar.
pub const DEFAULT_QUANTILES: [f64; 3] = [0.35, 0.5, 0.65];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantileTriple {
    pub q35: f64,
    pub q50: f64,
    pub q65: f64,
}

/// Linear-interpolation quantile of sorted data at position `q (n - 1)`.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Lower, middle and upper quantiles of `values` at the levels `qs`.
pub fn quantile_summary(values: &[f64], qs: [f64; 3]) -> Result<QuantileTriple> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if qs.iter().any(|q| !(0.0..=1.0).contains(q)) || !(qs[0] <= qs[1] && qs[1] <= qs[2]) {
        return Err(Error::InvalidInput("quantile levels must be ordered within [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(QuantileTriple {
        q35: quantile_sorted(&sorted, qs[0]),
        q50: quantile_sorted(&sorted, qs[1]),
        q65: quantile_sorted(&sorted, qs[2]),
    })
}

/// Squared Pearson correlation of two equally long series.
pub fn pearson_r2(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("series lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("at least two points are required"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::InvalidInput("zero variance"));
    }
    Ok(((sxy * sxy) / (sxx * syy)).min(1.0))
}

/// How the two sets are paired before computing R².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum CrossSetPairing {
    /// One point per normalized coefficient: (median of A, median of B).
    #[default]
    Medians,
    /// Every coefficient of the i-th image of A against the i-th image of B.
    /// Both sets must have the same length.
    IndexPaired,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct CrossSetReport {
    /// Quantiles of each normalized coefficient in set A, canonical order.
    pub set_a: [QuantileTriple; NUM_COEFFS - 1],
    pub set_b: [QuantileTriple; NUM_COEFFS - 1],
    pub pairing: CrossSetPairing,
    pub r2: f64,
}

fn coefficient_quantiles(set: &[NormalizedLighting]) -> Result<[QuantileTriple; NUM_COEFFS - 1]> {
    let mut out = [QuantileTriple {
        q35: 0.0,
        q50: 0.0,
        q65: 0.0,
    }; NUM_COEFFS - 1];
    for (k, slot) in out.iter_mut().enumerate() {
        let column: Vec<f64> = set.iter().map(|n| n.0[k]).collect();
        *slot = quantile_summary(&column, DEFAULT_QUANTILES)?;
    }
    Ok(out)
}

/// Compares two sets of normalized environments; R² over the eight median pairs.
pub fn cross_set_report(set_a: &[NormalizedLighting], set_b: &[NormalizedLighting]) -> Result<CrossSetReport> {
    cross_set_report_with(set_a, set_b, CrossSetPairing::Medians)
}

pub fn cross_set_report_with(
    set_a: &[NormalizedLighting],
    set_b: &[NormalizedLighting],
    pairing: CrossSetPairing,
) -> Result<CrossSetReport> {
    let qa = coefficient_quantiles(set_a)?;
    let qb = coefficient_quantiles(set_b)?;
    let r2 = match pairing {
        CrossSetPairing::Medians => {
            let xs: Vec<f64> = qa.iter().map(|q| q.q50).collect();
            let ys: Vec<f64> = qb.iter().map(|q| q.q50).collect();
            pearson_r2(&xs, &ys)?
        }
        CrossSetPairing::IndexPaired => {
            if set_a.len() != set_b.len() {
                return Err(Error::InvalidInput("index pairing needs equally sized sets"));
            }
            let xs: Vec<f64> = set_a.iter().flat_map(|n| n.0).collect();
            let ys: Vec<f64> = set_b.iter().flat_map(|n| n.0).collect();
            pearson_r2(&xs, &ys)?
        }
    };
    Ok(CrossSetReport {
        set_a: qa,
        set_b: qb,
        pairing,
        r2,
    })
}

/// Which orientations of each sphere pair enter the scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum PairOrientation {
    /// Both `(a, b)` and `(b, a)`; R² then does not depend on sphere labels.
    #[default]
    Mirrored,
    /// Only `(a, b)` with `a` the lower sphere index.
    Single,
}

/// A single within-image comparison: sphere `first` against sphere `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpherePair {
    pub image: usize,
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct WithinImageReport {
    pub orientation: PairOrientation,
    /// Unordered sphere pairs, `k (k - 1) / 2` per image.
    pub pairs: Vec<SpherePair>,
    /// Scatter points pooled per harmonic order (orders 0, 1, 2).
    pub points_by_order: [Vec<(f64, f64)>; 3],
    /// `None` when a pooled scatter has no variance and is not on `y = x`.
    pub r2_by_order: [Option<f64>; 3],
}

/// R² of a pooled scatter. A scatter whose points all coincide on the
/// diagonal `y = x` is perfect agreement and scores 1.
fn scatter_r2(points: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    match pearson_r2(&xs, &ys) {
        Ok(r2) => Some(r2),
        Err(_) => {
            let on_diagonal = !points.is_empty() && points.iter().all(|&(x, y)| x == y);
            let constant = points.windows(2).all(|w| w[0] == w[1]);
            (on_diagonal && constant).then_some(1.0)
        }
    }
}

/// Pairwise comparison of unnormalized environments of spheres sharing an image.
pub fn within_image_report(per_image: &[Vec<LightingEnv>]) -> Result<WithinImageReport> {
    within_image_report_with(per_image, PairOrientation::Mirrored)
}

pub fn within_image_report_with(
    per_image: &[Vec<LightingEnv>],
    orientation: PairOrientation,
) -> Result<WithinImageReport> {
    if per_image.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pairs = Vec::new();
    let mut points: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (image, envs) in per_image.iter().enumerate() {
        if envs.len() < 2 {
            return Err(Error::InvalidInput("every image needs at least two spheres"));
        }
        for i in 0..envs.len() {
            for j in i + 1..envs.len() {
                pairs.push(SpherePair {
                    image,
                    first: i,
                    second: j,
                });
                for (order, bucket) in points.iter_mut().enumerate() {
                    for (&a, &b) in envs[i].order(order).iter().zip(envs[j].order(order)) {
                        bucket.push((a, b));
                        if orientation == PairOrientation::Mirrored {
                            bucket.push((b, a));
                        }
                    }
                }
            }
        }
    }
    let r2_by_order = [scatter_r2(&points[0]), scatter_r2(&points[1]), scatter_r2(&points[2])];
    Ok(WithinImageReport {
        orientation,
        pairs,
        points_by_order: points,
        r2_by_order,
    })
}

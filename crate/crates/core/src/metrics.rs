//! ROI saliency metrics: RRF, ADR, DIF and RDDT.
//!
//! All four read a relevance map through a rectangular region of interest.
//! RRF looks at one map; ADR, DIF and RDDT compare a vanilla model's maps
//! with a debiased model's maps of the same images, and are positive when
//! the debiased model attends less to the region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{validate_roi, RelevanceMap, Roi};

/// Totals below this magnitude make RRF meaningless.
pub const DENOMINATOR_TOLERANCE: f64 = 1e-12;

/// Significance level used when none is given.
pub const DEFAULT_ALPHA: f64 = 0.01;

fn roi_sum(map: &RelevanceMap, roi: &Roi, f: impl Fn(f64) -> f64) -> f64 {
    roi.cells().map(|(r, c)| f(map.get(r, c))).sum()
}

/// Mean relevance inside `roi`.
pub fn roi_mean(map: &RelevanceMap, roi: &Roi) -> Result<f64> {
    validate_roi(map, roi)?;
    Ok(roi_sum(map, roi, |v| v) / roi.area() as f64)
}

/// Rectangle Relevance Fraction: signed relevance inside the region over the
/// signed total. Mixed-sign maps can land outside `[0, 1]`.
pub fn rrf(map: &RelevanceMap, roi: &Roi) -> Result<f64> {
    validate_roi(map, roi)?;
    let total = map.total();
    if total.abs() < DENOMINATOR_TOLERANCE {
        return Err(Error::DegenerateDenominator(total));
    }
    Ok(roi_sum(map, roi, |v| v) / total)
}

/// RRF over absolute relevance; always within `[0, 1]`.
pub fn rrf_abs(map: &RelevanceMap, roi: &Roi) -> Result<f64> {
    validate_roi(map, roi)?;
    let total = map.total_abs();
    if total < DENOMINATOR_TOLERANCE {
        return Err(Error::DegenerateDenominator(total));
    }
    Ok(roi_sum(map, roi, f64::abs) / total)
}

fn check_pair(vanilla: &RelevanceMap, debiased: &RelevanceMap, roi: &Roi) -> Result<()> {
    vanilla.ensure_same_shape(debiased)?;
    validate_roi(vanilla, roi)
}

/// Average Difference in Region: mean of `vanilla - debiased` over the region.
pub fn adr(vanilla: &RelevanceMap, debiased: &RelevanceMap, roi: &Roi) -> Result<f64> {
    check_pair(vanilla, debiased, roi)?;
    let sum: f64 = roi
        .cells()
        .map(|(r, c)| vanilla.get(r, c) - debiased.get(r, c))
        .sum();
    Ok(sum / roi.area() as f64)
}

/// Decreased Intensity Fraction: share of region pixels where the debiased
/// value is strictly below the vanilla one.
pub fn dif(vanilla: &RelevanceMap, debiased: &RelevanceMap, roi: &Roi) -> Result<f64> {
    check_pair(vanilla, debiased, roi)?;
    let decreased = roi
        .cells()
        .filter(|&(r, c)| debiased.get(r, c) < vanilla.get(r, c))
        .count();
    Ok(decreased as f64 / roi.area() as f64)
}

/// Outcome of the Rectangle Difference Distribution Test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RddtResult {
    /// True when H0 (no mean difference) is rejected in favour of the
    /// vanilla model attending more to the region.
    pub decision: bool,
    /// `None` when the differences are constant and nonzero.
    pub t_statistic: Option<f64>,
    pub p_value: f64,
    pub n: usize,
    pub mean_diff: f64,
    pub alpha: f64,
    /// Set when every per-image difference was identical.
    pub degenerate_variance: bool,
}

/// One-sided one-sample t-test on per-image differences of region means.
///
/// For image k, `d_k = mean_roi(vanilla_k) - mean_roi(debiased_k)`; the test
/// is `H0: mean(d) = 0` against `H1: mean(d) > 0` with `n - 1` degrees of
/// freedom, and rejects when `p < alpha`.
///
/// When all `d_k` are equal the statistic is undefined. A positive constant
/// is treated as conclusive (`p = 0`), zero as `t = 0, p = 0.5`, and a
/// negative constant as `p = 1`; `degenerate_variance` is set in all three.
pub fn rddt(
    vanilla_batch: &[RelevanceMap],
    debiased_batch: &[RelevanceMap],
    roi: &Roi,
    alpha: f64,
) -> Result<RddtResult> {
    if vanilla_batch.len() != debiased_batch.len() {
        return Err(crate::error::shape_mismatch(
            format!("{} debiased maps", vanilla_batch.len()),
            debiased_batch.len(),
        ));
    }
    check_alpha(alpha)?;
    if vanilla_batch.len() < 2 {
        return Err(Error::BatchTooSmall(vanilla_batch.len()));
    }
    let diffs = vanilla_batch
        .iter()
        .zip(debiased_batch)
        .map(|(v, d)| {
            check_pair(v, d, roi)?;
            Ok(roi_mean(v, roi)? - roi_mean(d, roi)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    rddt_from_differences(&diffs, alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadValue(format!("alpha={alpha} must lie in (0, 1]")));
    }
    Ok(())
}

/// The test part of [`rddt`], on precomputed differences.
pub fn rddt_from_differences(diffs: &[f64], alpha: f64) -> Result<RddtResult> {
    check_alpha(alpha)?;
    let n = diffs.len();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let mean_diff = stats::mean_std(diffs)?.0;
    let (t_statistic, p_value, degenerate_variance) = match stats::t_statistic(diffs) {
        Ok((t, df)) => (Some(t), stats::student_t_sf(t, df), false),
        Err(Error::ZeroVariance) => {
            let d = diffs[0];
            if d > 0.0 {
                (None, 0.0, true)
            } else if d == 0.0 {
                (Some(0.0), 0.5, true)
            } else {
                (None, 1.0, true)
            }
        }
        Err(e) => return Err(e),
    };
    Ok(RddtResult {
        decision: p_value < alpha,
        t_statistic,
        p_value,
        n,
        mean_diff: if degenerate_variance { diffs[0] } else { mean_diff },
        alpha,
        degenerate_variance,
    })
}

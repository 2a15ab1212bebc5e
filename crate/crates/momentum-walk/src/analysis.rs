//! Post-processing of walk records: spreading-exponent fits, growth-model
//! comparison, distribution distances, and peak finding.

use crate::engine::WalkRecord;
use crate::error::{Result, WalkError};
use crate::state::Distribution;

/// Fraction of the tallest bin below which local maxima are ignored.
pub const DEFAULT_PEAK_FLOOR: f64 = 0.02;

/// Result of fitting `sigma(j) = prefactor * j^exponent` over a step window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Inclusive step window the fit used.
    pub window: (usize, usize),
    pub r_squared: f64,
}

/// Which growth law a record's spread follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthModel {
    SquareRoot,
    Linear,
}

/// Akaike scores of the two candidate growth laws fitted to the same window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthComparison {
    pub sqrt_aic: f64,
    pub linear_aic: f64,
    pub preferred: GrowthModel,
    pub window: (usize, usize),
}

/// Default fit window: steps 3 through the last recorded step. The first
/// couple of steps are dominated by the initial state's width rather than the
/// asymptotic spreading law.
pub fn default_fit_window(record: &WalkRecord) -> (usize, usize) {
    (3, record.num_rows().saturating_sub(1))
}

fn window_slice(series: &[(usize, f64)], window: (usize, usize)) -> Result<Vec<(usize, f64)>> {
    let (lo, hi) = window;
    if lo == 0 {
        return Err(WalkError::InvalidParameter(
            "fit window must start at step 1 or later (step 0 has no defined power law)".into(),
        ));
    }
    if hi < lo {
        return Err(WalkError::InvalidParameter(format!(
            "fit window ({lo}, {hi}) is empty"
        )));
    }
    let points: Vec<(usize, f64)> = series
        .iter()
        .copied()
        .filter(|(j, _)| (lo..=hi).contains(j))
        .collect();
    if points.len() < 3 {
        return Err(WalkError::InvalidParameter(format!(
            "fit window ({lo}, {hi}) holds {} points; at least 3 are required",
            points.len()
        )));
    }
    for &(j, sigma) in &points {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(WalkError::InvalidParameter(format!(
                "standard deviation at step {j} is {sigma}; the log-log fit needs positive widths"
            )));
        }
    }
    Ok(points)
}

fn linear_least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        cov += (xi - mean_x) * (yi - mean_y);
        var_x += (xi - mean_x) * (xi - mean_x);
    }
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    let mut rss = 0.0;
    let mut tss = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        let r = yi - (slope * xi + intercept);
        rss += r * r;
        tss += (yi - mean_y) * (yi - mean_y);
    }
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    (slope, intercept, rss, r_squared)
}

/// Fits `sigma(j) = c * j^gamma` to a `(step, sigma)` series by least squares
/// in log-log coordinates.
pub fn fit_sigma_series(series: &[(usize, f64)], window: (usize, usize)) -> Result<ScalingFit> {
    let points = window_slice(series, window)?;
    let x: Vec<f64> = points.iter().map(|&(j, _)| (j as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|&(_, s)| s.ln()).collect();
    if x.iter().all(|&v| (v - x[0]).abs() < 1e-15) {
        return Err(WalkError::InvalidParameter(
            "fit window collapses to a single distinct step".into(),
        ));
    }
    let (slope, intercept, _, r_squared) = linear_least_squares(&x, &y);
    Ok(ScalingFit {
        exponent: slope,
        prefactor: intercept.exp(),
        window,
        r_squared,
    })
}

/// Fits the spreading law of a record's width series; `window` defaults to
/// [`default_fit_window`].
pub fn fit_scaling(record: &WalkRecord, window: Option<(usize, usize)>) -> Result<ScalingFit> {
    let window = window.unwrap_or_else(|| default_fit_window(record));
    fit_sigma_series(&record.sigma_series(), window)
}

fn model_aic(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (_, _, rss, _) = linear_least_squares(x, y);
    n * (rss / n).ln() + 2.0 * 2.0
}

/// Scores `sigma = a sqrt(j) + b` against `sigma = a j + b` on the same
/// window via the Akaike information criterion (lower wins). Diffusive
/// spreading prefers the square-root law; ballistic spreading the linear one.
pub fn compare_growth_models(
    record: &WalkRecord,
    window: Option<(usize, usize)>,
) -> Result<GrowthComparison> {
    let window = window.unwrap_or_else(|| default_fit_window(record));
    let points = window_slice(&record.sigma_series(), window)?;
    let sigma: Vec<f64> = points.iter().map(|&(_, s)| s).collect();
    let sqrt_j: Vec<f64> = points.iter().map(|&(j, _)| (j as f64).sqrt()).collect();
    let lin_j: Vec<f64> = points.iter().map(|&(j, _)| j as f64).collect();
    let sqrt_aic = model_aic(&sqrt_j, &sigma);
    let linear_aic = model_aic(&lin_j, &sigma);
    Ok(GrowthComparison {
        sqrt_aic,
        linear_aic,
        preferred: if sqrt_aic <= linear_aic {
            GrowthModel::SquareRoot
        } else {
            GrowthModel::Linear
        },
        window,
    })
}

/// Total-variation distance `(1/2) sum |a_n - b_n|` between two distributions
/// on the same momentum window.
pub fn total_variation(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.num_bins() != b.num_bins() {
        return Err(WalkError::GridMismatch(a.num_bins(), b.num_bins()));
    }
    Ok(a.total()
        .iter()
        .zip(b.total().iter())
        .map(|(pa, pb)| (pa - pb).abs())
        .sum::<f64>()
        / 2.0)
}

/// Momentum classes that are strict local maxima of the distribution and at
/// least `floor_fraction` of its tallest bin. Edge bins are never reported —
/// a properly sized window keeps real peaks interior.
pub fn peak_positions(dist: &Distribution, floor_fraction: f64) -> Vec<i64> {
    let p = dist.total();
    if p.len() < 3 {
        return Vec::new();
    }
    let max = p.iter().cloned().fold(0.0, f64::max);
    let floor = floor_fraction * max;
    let hw = (p.len() / 2) as i64;
    (1..p.len() - 1)
        .filter(|&i| p[i] > p[i - 1] && p[i] > p[i + 1] && p[i] >= floor)
        .map(|i| i as i64 - hw)
        .collect()
}

//! Least-squares trends in units per decade.

use crate::data::container::FieldContainer;
use crate::error::{Error, Result};
use crate::forcing::YEAR_SECONDS;
use crate::grid::GridSpec;
use crate::sht::quadrature_mean;

pub const DECADE_SECONDS: f64 = 10.0 * YEAR_SECONDS as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    /// Units per decade.
    pub slope: f64,
    /// Value at time zero.
    pub intercept: f64,
    /// Mean squared residual.
    pub residual_variance: f64,
    pub n: usize,
    pub label: String,
}

/// Ordinary least squares of `y` on `x` (in decades).
pub fn fit_trend_xy(x: &[f64], y: &[f64]) -> Result<TrendFit> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: vec![x.len()],
            got: vec![y.len()],
        });
    }
    if x.len() < 2 {
        return Err(Error::Invalid("trend needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Invalid("constant time axis".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(TrendFit {
        slope,
        intercept,
        residual_variance: ssr / n,
        n: x.len(),
        label: String::new(),
    })
}

/// Trend of a regularly sampled series with spacing `step_seconds`, time
/// zero at the first sample.
pub fn fit_trend(series: &[f64], step_seconds: f64) -> Result<TrendFit> {
    if !(step_seconds > 0.0) {
        return Err(Error::Invalid("constant time axis".into()));
    }
    let x: Vec<f64> = (0..series.len()).map(|i| i as f64 * step_seconds / DECADE_SECONDS).collect();
    fit_trend_xy(&x, series)
}

/// Area-weighted global mean of one variable level at every step.
pub fn global_mean_series(traj: &FieldContainer, var: &str, level: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    (0..traj.time_count())
        .map(|t| quadrature_mean(traj.field(t, var, level)?, grid))
        .collect()
}

/// Means over consecutive blocks of one year; a trailing partial year is dropped.
pub fn annual_means(series: &[f64], time_step: i64) -> Result<Vec<f64>> {
    if time_step <= 0 || YEAR_SECONDS % time_step != 0 {
        return Err(Error::Invalid(format!("time step {time_step} s does not divide a year")));
    }
    let per_year = (YEAR_SECONDS / time_step) as usize;
    Ok(series
        .chunks_exact(per_year)
        .map(|c| c.iter().sum::<f64>() / per_year as f64)
        .collect())
}

/// Trend of the annual-mean global mean of a variable level, per decade.
pub fn annual_trend(traj: &FieldContainer, var: &str, level: usize, grid: &GridSpec) -> Result<TrendFit> {
    let series = global_mean_series(traj, var, level, grid)?;
    let annual = annual_means(&series, traj.header.time_step)?;
    let mut fit = fit_trend(&annual, YEAR_SECONDS as f64)?;
    fit.label = format!("{var}@{level} annual global mean");
    Ok(fit)
}

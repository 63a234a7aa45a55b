//! Area-weighted probability densities on a log scale.

use crate::data::container::FieldContainer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogPdf {
    pub edges: Vec<f64>,
    /// `log10` density per bin; negative infinity for empty bins.
    pub log_density: Vec<f64>,
    /// Fraction of the total weight falling outside the edges.
    pub outside: f64,
    /// Every in-range sample landed in a single bin.
    pub single_bin: bool,
}

impl LogPdf {
    pub fn density(&self) -> Vec<f64> {
        self.log_density.iter().map(|l| 10f64.powf(*l)).collect()
    }

    /// Integral of the density over the bins.
    pub fn integral(&self) -> f64 {
        self.density().iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }
}

/// `nbins` equal bins spanning the union range of several sample sets.
pub fn shared_edges(sets: &[&[f64]], nbins: usize) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in sets.iter().flat_map(|s| s.iter()) {
        if v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if nbins == 0 || !lo.is_finite() {
        return Err(Error::Invalid("no finite samples or zero bins".into()));
    }
    if hi == lo {
        hi = lo + 1.0;
    }
    let w = (hi - lo) / nbins as f64;
    let mut edges: Vec<f64> = (0..=nbins).map(|i| lo + w * i as f64).collect();
    edges[nbins] = hi;
    Ok(edges)
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[n]) {
        return None;
    }
    let k = edges.partition_point(|e| *e <= v);
    Some(k.saturating_sub(1).min(n - 1))
}

/// Weighted histogram normalized to unit integral over the bins.
pub fn weighted_log_pdf(values: &[f64], weights: &[f64], edges: &[f64]) -> Result<LogPdf> {
    if values.len() != weights.len() {
        return Err(Error::Shape {
            expected: vec![values.len()],
            got: vec![weights.len()],
        });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("bin edges must increase".into()));
    }
    if values.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    let nb = edges.len() - 1;
    let mut mass = vec![0.0; nb];
    let mut out = 0.0;
    for (v, w) in values.iter().zip(weights) {
        match bin_of(edges, *v) {
            Some(k) => mass[k] += w,
            None => out += w,
        }
    }
    let inside: f64 = mass.iter().sum();
    if !(inside > 0.0) {
        return Err(Error::Invalid("no samples inside the bin edges".into()));
    }
    let log_density = mass
        .iter()
        .zip(edges.windows(2))
        .map(|(m, e)| (m / (inside * (e[1] - e[0]))).log10())
        .collect();
    Ok(LogPdf {
        edges: edges.to_vec(),
        log_density,
        outside: out / (inside + out),
        single_bin: mass.iter().filter(|m| **m > 0.0).count() == 1,
    })
}

/// Area-weighted log-density of one variable level over every step.
pub fn log_pdf(traj: &FieldContainer, var: &str, level: usize, edges: &[f64]) -> Result<LogPdf> {
    let grid = traj.header.grid()?;
    let mut values = Vec::with_capacity(traj.time_count() * grid.npoints());
    let mut weights = Vec::with_capacity(values.capacity());
    for t in 0..traj.time_count() {
        values.extend_from_slice(traj.field(t, var, level)?);
        for w in &grid.gauss_weights {
            weights.extend(std::iter::repeat(*w).take(grid.nlon));
        }
    }
    weighted_log_pdf(&values, &weights, edges)
}

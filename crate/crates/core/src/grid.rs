//! Gaussian latitude/longitude grids and Gauss-Legendre quadrature.
//!
//! Latitude rows are ordered south to north: `gauss_nodes[i]` is the sine of
//! latitude and increases with `i`. Field arrays are row-major `[lat][lon]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// The eight terrain-following levels, top of model first.
pub const DEFAULT_SIGMA_LEVELS: [f64; 8] = [0.025, 0.095, 0.20, 0.34, 0.51, 0.685, 0.835, 0.95];

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nlat: usize,
    pub nlon: usize,
    /// Maximum spherical-harmonic degree kept under triangular truncation.
    pub truncation: usize,
    pub gauss_nodes: Vec<f64>,
    pub gauss_weights: Vec<f64>,
    pub sigma_levels: Vec<f64>,
}

impl GridSpec {
    /// Desk-scale default, T15 on a 24 x 48 grid.
    pub fn t15() -> Result<Self> {
        build_grid(15, 24, 48)
    }

    /// T30 on a 48 x 96 grid.
    pub fn t30() -> Result<Self> {
        build_grid(30, 48, 96)
    }

    /// T7 on a 12 x 24 grid, used by the fast tests and the desk experiments.
    pub fn t7() -> Result<Self> {
        build_grid(7, 12, 24)
    }

    pub fn npoints(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.nlat, self.nlon]
    }

    pub fn nlevels(&self) -> usize {
        self.sigma_levels.len()
    }

    /// Latitude of each row in radians.
    pub fn latitudes(&self) -> Vec<f64> {
        self.gauss_nodes.iter().map(|x| x.asin()).collect()
    }

    pub fn latitudes_deg(&self) -> Vec<f64> {
        self.gauss_nodes.iter().map(|x| x.asin().to_degrees()).collect()
    }

    /// Longitude of each column in radians, starting at 0.
    pub fn longitudes(&self) -> Vec<f64> {
        (0..self.nlon)
            .map(|j| 2.0 * PI * j as f64 / self.nlon as f64)
            .collect()
    }

    pub fn with_sigma_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        check_sigma(&levels)?;
        self.sigma_levels = levels;
        Ok(self)
    }

    pub(crate) fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.npoints() {
            return Err(Error::Shape {
                expected: vec![self.nlat, self.nlon],
                got: vec![field.len()],
            });
        }
        Ok(())
    }
}

fn check_sigma(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidGrid("no sigma levels".into()));
    }
    if levels.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::InvalidGrid("sigma levels must lie in (0, 1]".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "sigma levels must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Builds a Gaussian grid with the default sigma levels.
pub fn build_grid(truncation: usize, nlat: usize, nlon: usize) -> Result<GridSpec> {
    if truncation < 1 {
        return Err(Error::InvalidGrid("truncation must be at least 1".into()));
    }
    if nlat < truncation + 1 {
        return Err(Error::InvalidGrid(format!(
            "nlat = {nlat} aliases truncation {truncation} (need nlat >= {})",
            truncation + 1
        )));
    }
    if nlon < 2 * truncation + 1 {
        return Err(Error::InvalidGrid(format!(
            "nlon = {nlon} aliases truncation {truncation} (need nlon >= {})",
            2 * truncation + 1
        )));
    }
    let (gauss_nodes, gauss_weights) = gauss_legendre(nlat)?;
    Ok(GridSpec {
        nlat,
        nlon,
        truncation,
        gauss_nodes,
        gauss_weights,
        sigma_levels: DEFAULT_SIGMA_LEVELS.to_vec(),
    })
}

/// Legendre polynomial P_n(x) and its derivative by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Nodes (ascending) and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidGrid("nlat must be positive".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Roots come out descending from +1; mirror them into both halves.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() {
            return Err(Error::NonConvergent { index: i, n });
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

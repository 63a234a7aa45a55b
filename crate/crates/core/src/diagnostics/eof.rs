//! Leading empirical orthogonal function of hemispheric winter anomalies.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::container::FieldContainer;
use crate::error::{Error, Result};
use crate::forcing::{month_of, year_of, MONTHS_PER_YEAR};

/// Relative eigenvalue gap below which the leading pair is reported degenerate.
const DEGENERATE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    North,
    South,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EofParams {
    pub hemisphere: Hemisphere,
    /// Equatorward edge of the domain in degrees.
    pub min_lat_deg: f64,
    /// Loadings poleward of this latitude define the sign convention.
    pub polar_cap_deg: f64,
    /// Calendar months (0 = January) to keep.
    pub months: Vec<usize>,
}

impl EofParams {
    /// December-February over 20-90 degrees of `hemisphere`.
    pub fn djf(hemisphere: Hemisphere) -> Self {
        Self {
            hemisphere,
            min_lat_deg: 20.0,
            polar_cap_deg: 60.0,
            months: vec![11, 0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EofResult {
    /// Grid rows of the domain, south to north.
    pub rows: Vec<usize>,
    pub nlon: usize,
    /// Leading pattern in field units; unit norm once multiplied by sqrt(cos(lat)).
    pub pattern: Vec<f64>,
    pub explained_variance: f64,
    /// Variance fractions of every mode, descending.
    pub explained_all: Vec<f64>,
    pub pcs: Vec<f64>,
    /// Step index of each principal-component sample.
    pub times: Vec<usize>,
    /// Whether the sign was flipped to make the polar-cap loading negative.
    pub flipped: bool,
    /// Leading two eigenvalues are too close to separate.
    pub degenerate: bool,
}

/// Season label of a time: December counts toward the following year.
pub fn season_year(t: i64) -> i64 {
    if month_of(t) == 11 {
        year_of(t) + 1
    } else {
        year_of(t)
    }
}

/// EOF of a `[time][lat][lon]` series given the time stamp of each sample.
pub fn eof_from_series(series: &[&[f64]], times: &[i64], lats_deg: &[f64], nlon: usize, params: &EofParams) -> Result<EofResult> {
    let nlat = lats_deg.len();
    let in_domain = |lat: f64| match params.hemisphere {
        Hemisphere::North => lat >= params.min_lat_deg,
        Hemisphere::South => lat <= -params.min_lat_deg,
    };
    let rows: Vec<usize> = (0..nlat).filter(|&i| in_domain(lats_deg[i])).collect();
    if rows.is_empty() {
        return Err(Error::Invalid("no grid rows in the EOF domain".into()));
    }
    let steps: Vec<usize> = (0..series.len())
        .filter(|&t| params.months.contains(&month_of(times[t])))
        .collect();
    let mut seasons: Vec<i64> = steps.iter().map(|&t| season_year(times[t])).collect();
    seasons.dedup();
    if seasons.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 seasons, found {}", seasons.len())));
    }
    let npts = rows.len() * nlon;
    let weight: Vec<f64> = rows
        .iter()
        .flat_map(|&i| std::iter::repeat(lats_deg[i].to_radians().cos().max(0.0).sqrt()).take(nlon))
        .collect();
    let extract = |t: usize| -> Vec<f64> { rows.iter().flat_map(|&i| series[t][i * nlon..(i + 1) * nlon].iter().copied()).collect() };

    // Monthly climatology removes the seasonal cycle.
    let mut clim = vec![vec![0.0; npts]; MONTHS_PER_YEAR as usize];
    let mut count = vec![0usize; MONTHS_PER_YEAR as usize];
    for &t in &steps {
        let m = month_of(times[t]);
        clim[m].iter_mut().zip(extract(t)).for_each(|(c, v)| *c += v);
        count[m] += 1;
    }
    for (c, n) in clim.iter_mut().zip(&count) {
        if *n > 0 {
            c.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    let mut x = DMatrix::<f64>::zeros(steps.len(), npts);
    for (r, &t) in steps.iter().enumerate() {
        let c = &clim[month_of(times[t])];
        for (p, v) in extract(t).into_iter().enumerate() {
            x[(r, p)] = (v - c[p]) * weight[p];
        }
    }
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..npts).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Invalid("anomalies are identically zero".into()));
    }
    let explained_all: Vec<f64> = vals.iter().map(|v| v / total).collect();
    let degenerate = vals.len() > 1 && (vals[0] - vals[1]) <= DEGENERATE_GAP * vals[0];
    let lead = eig.eigenvectors.column(order[0]).into_owned();
    let cap: Vec<usize> = (0..npts)
        .filter(|&p| lats_deg[rows[p / nlon]].abs() >= params.polar_cap_deg)
        .collect();
    let cap: Vec<usize> = if cap.is_empty() {
        let pole_row = match params.hemisphere {
            Hemisphere::North => rows.len() - 1,
            Hemisphere::South => 0,
        };
        (pole_row * nlon..(pole_row + 1) * nlon).collect()
    } else {
        cap
    };
    let cap_mean: f64 = cap.iter().map(|&p| lead[p] / weight[p]).sum::<f64>();
    let flipped = cap_mean > 0.0;
    let sign = if flipped { -1.0 } else { 1.0 };
    let lead = lead * sign;
    let pcs = (&x * &lead).iter().copied().collect();
    let pattern = (0..npts).map(|p| lead[p] / weight[p]).collect();
    Ok(EofResult {
        rows,
        nlon,
        pattern,
        explained_variance: explained_all[0],
        explained_all,
        pcs,
        times: steps,
        flipped,
        degenerate,
    })
}

/// Leading EOF of one variable level of a trajectory (usually log surface pressure).
pub fn leading_eof(traj: &FieldContainer, var: &str, level: usize, params: &EofParams) -> Result<EofResult> {
    let grid = traj.header.grid()?;
    let series: Vec<&[f64]> = (0..traj.time_count()).map(|t| traj.field(t, var, level)).collect::<Result<_>>()?;
    let times: Vec<i64> = (0..traj.time_count()).map(|t| traj.header.time(t)).collect();
    eof_from_series(&series, &times, &grid.latitudes_deg(), grid.nlon, params)
}

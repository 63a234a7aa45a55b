//! Synthetic calendar, analytic insolation and monthly CO2 interpolation.
//!
//! Time is measured in seconds from the start of synthetic year 0. A year
//! has 360 days in twelve 30-day months; the model step is 6 hours.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub const STEP_SECONDS: i64 = 6 * 3600;
pub const DAY_SECONDS: i64 = 86_400;
pub const DAYS_PER_MONTH: i64 = 30;
pub const MONTHS_PER_YEAR: i64 = 12;
pub const DAYS_PER_YEAR: i64 = DAYS_PER_MONTH * MONTHS_PER_YEAR;
pub const YEAR_SECONDS: i64 = DAYS_PER_YEAR * DAY_SECONDS;
pub const MONTH_SECONDS: i64 = DAYS_PER_MONTH * DAY_SECONDS;
pub const STEPS_PER_DAY: usize = (DAY_SECONDS / STEP_SECONDS) as usize;
pub const STEPS_PER_YEAR: usize = (YEAR_SECONDS / STEP_SECONDS) as usize;
pub const SOLAR_CONSTANT: f64 = 1361.0;

const OBLIQUITY_DEG: f64 = 23.44;

pub fn year_of(t: i64) -> i64 {
    t.div_euclid(YEAR_SECONDS)
}

/// Fractional day within the year, in `[0, 360)`.
pub fn day_of_year(t: i64) -> f64 {
    t.rem_euclid(YEAR_SECONDS) as f64 / DAY_SECONDS as f64
}

/// Calendar month `0..12` (0 = January).
pub fn month_of(t: i64) -> usize {
    (t.rem_euclid(YEAR_SECONDS) / MONTH_SECONDS) as usize
}

/// Solar declination for a circular orbit with the northern summer solstice near day 170.
pub fn declination(day: f64) -> f64 {
    -OBLIQUITY_DEG.to_radians() * (2.0 * PI * (day + 10.0) / DAYS_PER_YEAR as f64).cos()
}

/// Daily-mean top-of-atmosphere insolation (W m-2) at latitude `lat` (radians).
pub fn daily_mean_insolation(lat: f64, day: f64, solar_constant: f64) -> f64 {
    let dec = declination(day);
    let x = -lat.tan() * dec.tan();
    let h0 = if x >= 1.0 {
        0.0
    } else if x <= -1.0 {
        PI
    } else {
        x.acos()
    };
    let q = solar_constant / PI * (h0 * lat.sin() * dec.sin() + lat.cos() * dec.cos() * h0.sin());
    q.max(0.0)
}

/// Zonally uniform insolation field at time `t`.
pub fn tisr_field(grid: &GridSpec, t: i64, solar_constant: f64) -> Vec<f64> {
    let day = day_of_year(t);
    let mut out = Vec::with_capacity(grid.npoints());
    for lat in grid.latitudes() {
        let q = daily_mean_insolation(lat, day, solar_constant);
        out.extend(std::iter::repeat(q).take(grid.nlon));
    }
    out
}

/// Monthly values anchored at month midpoints. Absolute month `n` covers
/// `[n, n+1) * MONTH_SECONDS` and its anchor sits 15 days in.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub first_month: i64,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(first_month: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("monthly series needs finite values".into()));
        }
        Ok(Self { first_month, values })
    }

    pub fn anchor_time(month: i64) -> i64 {
        month * MONTH_SECONDS + MONTH_SECONDS / 2
    }

    /// Inclusive time span covered by the anchors.
    pub fn span(&self) -> (i64, i64) {
        (
            Self::anchor_time(self.first_month),
            Self::anchor_time(self.first_month + self.values.len() as i64 - 1),
        )
    }

    /// Value of absolute month `n`, if present.
    pub fn month(&self, n: i64) -> Option<f64> {
        let k = n - self.first_month;
        (k >= 0).then(|| self.values.get(k as usize).copied()).flatten()
    }
}

/// Piecewise-linear interpolation between month-midpoint anchors.
pub fn interpolate_co2(series: &MonthlySeries, t: i64) -> Result<f64> {
    let (lo, hi) = series.span();
    if t < lo || t > hi {
        return Err(Error::OutOfRange(format!("time {t} outside CO2 anchors [{lo}, {hi}]")));
    }
    let rel = t - lo;
    let k = (rel / MONTH_SECONDS) as usize;
    if k + 1 >= series.values.len() {
        return Ok(series.values[series.values.len() - 1]);
    }
    let frac = (rel - k as i64 * MONTH_SECONDS) as f64 / MONTH_SECONDS as f64;
    Ok(series.values[k] + frac * (series.values[k + 1] - series.values[k]))
}

/// CO2 for a stationary run anchored at `year`: that year's twelve monthly
/// values interpolated cyclically, so the result is periodic in `t` with
/// period one year.
pub fn stationary_co2(series: &MonthlySeries, year: i64, t: i64) -> Result<f64> {
    let months: Vec<f64> = (0..MONTHS_PER_YEAR)
        .map(|m| series.month(year * MONTHS_PER_YEAR + m))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::OutOfRange(format!("CO2 series does not cover year {year}")))?;
    let pos = (t.rem_euclid(YEAR_SECONDS) - MONTH_SECONDS / 2).rem_euclid(YEAR_SECONDS);
    let k = (pos / MONTH_SECONDS) as usize;
    let frac = (pos - k as i64 * MONTH_SECONDS) as f64 / MONTH_SECONDS as f64;
    let next = months[(k + 1) % 12];
    Ok(months[k] + frac * (next - months[k]))
}

//! Sudden stratospheric warming indices, daily climatology and event detection.

use crate::data::container::FieldContainer;
use crate::diagnostics::steps_per_day;
use crate::error::{Error, Result};
use crate::forcing::{DAYS_PER_MONTH, DAYS_PER_YEAR, DAY_SECONDS};
use crate::layout;

#[derive(Debug, Clone, PartialEq)]
pub struct SswParams {
    /// Latitude band of the zonal-wind index, degrees north.
    pub wind_band: (f64, f64),
    /// Polar-cap temperature index covers latitudes poleward of this.
    pub cap_lat: f64,
    /// Days of uninterrupted westerlies required before an onset.
    pub min_westerly_days: usize,
    /// Days the easterly reversal must last to count.
    pub min_easterly_days: usize,
    /// Calendar months (0 = January) in which onsets may occur.
    pub winter_months: Vec<usize>,
    /// Vertical level of the indices (0 = model top).
    pub level: usize,
}

impl Default for SswParams {
    fn default() -> Self {
        Self {
            wind_band: (55.0, 65.0),
            cap_lat: 60.0,
            min_westerly_days: 20,
            min_easterly_days: 2,
            winter_months: vec![10, 11, 0, 1, 2],
            level: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SswEvent {
    /// Day index (from the start of the series) of the first easterly day.
    pub onset_day: usize,
    pub duration_days: usize,
    /// Largest polar-cap temperature anomaly during the reversal.
    pub peak_temperature_anomaly: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyClimatology {
    /// Mean and standard deviation per day of year; NaN where no data.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DailyClimatology {
    pub fn envelope(&self, day: usize) -> (f64, f64) {
        (self.mean[day] - 2.0 * self.std[day], self.mean[day] + 2.0 * self.std[day])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SswReport {
    pub wind_index: Vec<f64>,
    pub temperature_index: Vec<f64>,
    pub day_of_year: Vec<usize>,
    /// Present when the series spans at least one year.
    pub wind_climatology: Option<DailyClimatology>,
    pub temperature_climatology: Option<DailyClimatology>,
    pub events: Vec<SswEvent>,
}

/// Mean and spread per day of year.
pub fn daily_climatology(series: &[f64], day_of_year: &[usize]) -> DailyClimatology {
    let n = DAYS_PER_YEAR as usize;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (v, &d) in series.iter().zip(day_of_year) {
        sum[d] += v;
        count[d] += 1;
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN }).collect();
    let mut ss = vec![0.0; n];
    for (v, &d) in series.iter().zip(day_of_year) {
        ss[d] += (v - mean[d]).powi(2);
    }
    let std = ss.iter().zip(&count).map(|(s, c)| if *c > 0 { (s / *c as f64).sqrt() } else { f64::NAN }).collect();
    DailyClimatology { mean, std }
}

/// Events in a daily wind index. An onset is the first easterly day after at
/// least `min_westerly_days` westerly days, inside the winter months, with
/// the reversal lasting `min_easterly_days`. Temperature anomalies are taken
/// against `temp_clim` when given, else the series mean.
pub fn detect_ssw(wind: &[f64], temp: &[f64], day_of_year: &[usize], temp_clim: Option<&DailyClimatology>, params: &SswParams) -> Vec<SswEvent> {
    let temp_mean = temp.iter().sum::<f64>() / temp.len().max(1) as f64;
    let anomaly = |d: usize| match temp_clim {
        Some(c) if c.mean[day_of_year[d]].is_finite() => temp[d] - c.mean[day_of_year[d]],
        _ => temp[d] - temp_mean,
    };
    let mut events = Vec::new();
    let mut westerly_run = 0usize;
    let mut d = 0;
    while d < wind.len() {
        if wind[d] >= 0.0 {
            westerly_run += 1;
            d += 1;
            continue;
        }
        let month = day_of_year[d] / DAYS_PER_MONTH as usize;
        let end = (d..wind.len()).find(|&e| wind[e] >= 0.0).unwrap_or(wind.len());
        let duration = end - d;
        if westerly_run >= params.min_westerly_days && duration >= params.min_easterly_days && params.winter_months.contains(&month) {
            let peak = (d..end).map(anomaly).fold(f64::NEG_INFINITY, f64::max);
            events.push(SswEvent {
                onset_day: d,
                duration_days: duration,
                peak_temperature_anomaly: peak,
            });
        }
        westerly_run = 0;
        d = end;
    }
    events
}

/// Rows of `lats_deg` inside `[lo, hi]`; the nearest row when none fall inside.
fn band_rows(lats_deg: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    let rows: Vec<usize> = (0..lats_deg.len()).filter(|&i| lats_deg[i] >= lo && lats_deg[i] <= hi).collect();
    if !rows.is_empty() {
        return rows;
    }
    let mid = 0.5 * (lo + hi);
    let nearest = (0..lats_deg.len())
        .min_by(|&a, &b| (lats_deg[a] - mid).abs().total_cmp(&(lats_deg[b] - mid).abs()))
        .expect("non-empty grid");
    vec![nearest]
}

fn weighted_band_mean(field: &[f64], rows: &[usize], weights: &[f64], nlon: usize) -> f64 {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for &i in rows {
        acc += weights[i] * field[i * nlon..(i + 1) * nlon].iter().sum::<f64>();
        wsum += weights[i] * nlon as f64;
    }
    acc / wsum
}

/// Daily indices, climatology with two-sigma envelope, and events.
pub fn ssw_diagnostics(traj: &FieldContainer, params: &SswParams) -> Result<SswReport> {
    let grid = traj.header.grid()?;
    let lats = grid.latitudes_deg();
    let spd = steps_per_day(traj)?;
    let wind_rows = band_rows(&lats, params.wind_band.0, params.wind_band.1);
    let cap_rows = band_rows(&lats, params.cap_lat, 90.0);
    let ndays = traj.time_count() / spd;
    if ndays == 0 {
        return Err(Error::Invalid("trajectory shorter than one day".into()));
    }
    let mut wind = Vec::with_capacity(ndays);
    let mut temp = Vec::with_capacity(ndays);
    let mut doy = Vec::with_capacity(ndays);
    for d in 0..ndays {
        let (mut u, mut t) = (0.0, 0.0);
        for s in d * spd..(d + 1) * spd {
            u += weighted_band_mean(traj.field(s, layout::ZONAL_WIND, params.level)?, &wind_rows, &grid.gauss_weights, grid.nlon);
            t += weighted_band_mean(traj.field(s, layout::TEMPERATURE, params.level)?, &cap_rows, &grid.gauss_weights, grid.nlon);
        }
        wind.push(u / spd as f64);
        temp.push(t / spd as f64);
        doy.push((traj.header.time(d * spd).div_euclid(DAY_SECONDS)).rem_euclid(DAYS_PER_YEAR) as usize);
    }
    let full_year = ndays >= DAYS_PER_YEAR as usize;
    let wind_clim = full_year.then(|| daily_climatology(&wind, &doy));
    let temp_clim = full_year.then(|| daily_climatology(&temp, &doy));
    let events = detect_ssw(&wind, &temp, &doy, temp_clim.as_ref(), params);
    Ok(SswReport {
        wind_index: wind,
        temperature_index: temp,
        day_of_year: doy,
        wind_climatology: wind_clim,
        temperature_climatology: temp_clim,
        events,
    })
}

//! Wavenumber-frequency spectra of equatorial fields split into equatorially
//! symmetric and antisymmetric parts.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::data::container::FieldContainer;
use crate::diagnostics::{field_series, steps_per_day};
use crate::error::{Error, Result};

const EARTH_RADIUS: f64 = 6.371e6;
const GRAVITY: f64 = 9.81;

/// Equivalent depths (m) of the reference dispersion curves.
pub const EQUIVALENT_DEPTHS: [f64; 3] = [12.0, 25.0, 50.0];

#[derive(Debug, Clone, PartialEq)]
pub struct WkParams {
    pub segment_days: f64,
    pub overlap_days: f64,
    /// Half-width of the equatorial band in degrees.
    pub lat_band_deg: f64,
    pub max_wavenumber: usize,
    /// 1-2-1 smoothing passes for the background; 0 disables normalization.
    pub background_passes: usize,
}

impl Default for WkParams {
    fn default() -> Self {
        Self {
            segment_days: 96.0,
            overlap_days: 60.0,
            lat_band_deg: 15.0,
            max_wavenumber: 15,
            background_passes: 10,
        }
    }
}

/// One-sided power over `wavenumbers x frequencies` (row-major by wavenumber).
/// Positive wavenumbers propagate eastward.
#[derive(Debug, Clone, PartialEq)]
pub struct WkSpectrum {
    pub wavenumbers: Vec<i32>,
    /// Cycles per day, from 0 to the Nyquist frequency.
    pub frequencies: Vec<f64>,
    pub symmetric: Vec<f64>,
    pub antisymmetric: Vec<f64>,
    pub background: Option<Vec<f64>>,
    pub segments: usize,
    pub segment_len: usize,
    pub band_lats_deg: Vec<f64>,
}

impl WkSpectrum {
    pub fn index(&self, k: i32, f_bin: usize) -> usize {
        (k - self.wavenumbers[0]) as usize * self.frequencies.len() + f_bin
    }

    pub fn power(&self, symmetric: bool, k: i32, f_bin: usize) -> f64 {
        let p = if symmetric { &self.symmetric } else { &self.antisymmetric };
        p[self.index(k, f_bin)]
    }

    /// `(wavenumber, frequency)` of the largest power, ignoring zero frequency.
    pub fn argmax(&self, symmetric: bool) -> (i32, f64) {
        let p = if symmetric { &self.symmetric } else { &self.antisymmetric };
        let nf = self.frequencies.len();
        let mut best = (0usize, 1usize);
        for ki in 0..self.wavenumbers.len() {
            for fi in 1..nf {
                if p[ki * nf + fi] > p[best.0 * nf + best.1] {
                    best = (ki, fi);
                }
            }
        }
        (self.wavenumbers[best.0], self.frequencies[best.1])
    }

    /// Raw power divided by the smoothed background.
    pub fn normalized(&self, symmetric: bool) -> Option<Vec<f64>> {
        let p = if symmetric { &self.symmetric } else { &self.antisymmetric };
        self.background
            .as_ref()
            .map(|b| p.iter().zip(b).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect())
    }
}

/// Kelvin-wave frequency (cycles per day) at wavenumber `k` for equivalent depth `h`.
pub fn kelvin_frequency(h: f64, k: f64) -> f64 {
    k * (GRAVITY * h).sqrt() / (2.0 * PI * EARTH_RADIUS) * 86_400.0
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos())).collect()
}

/// Two-sided periodogram `|F(t_freq, m)|^2 / (L N)` of a `[time][lon]` block.
/// Its sum equals the block's sum of squares.
pub fn segment_periodogram(block: &[f64], len: usize, nlon: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = block.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let fft_lon = planner.plan_fft_forward(nlon);
    for row in buf.chunks_mut(nlon) {
        fft_lon.process(row);
    }
    let fft_t = planner.plan_fft_forward(len);
    let mut col = vec![Complex64::new(0.0, 0.0); len];
    for m in 0..nlon {
        for t in 0..len {
            col[t] = buf[t * nlon + m];
        }
        fft_t.process(&mut col);
        for t in 0..len {
            buf[t * nlon + m] = col[t];
        }
    }
    let norm = (len * nlon) as f64;
    buf.iter().map(|c| c.norm_sqr() / norm).collect()
}

/// Removes the least-squares line in time from every longitude, then tapers.
fn detrend_taper(block: &mut [f64], len: usize, nlon: usize, taper: &[f64]) {
    let tm = (len as f64 - 1.0) / 2.0;
    let stt: f64 = (0..len).map(|t| (t as f64 - tm).powi(2)).sum();
    for j in 0..nlon {
        let mean = (0..len).map(|t| block[t * nlon + j]).sum::<f64>() / len as f64;
        let slope = if stt > 0.0 {
            (0..len).map(|t| (t as f64 - tm) * block[t * nlon + j]).sum::<f64>() / stt
        } else {
            0.0
        };
        for t in 0..len {
            let v = &mut block[t * nlon + j];
            *v = (*v - mean - slope * (t as f64 - tm)) * taper[t];
        }
    }
}

fn smooth_121(values: &mut [f64], nk: usize, nf: usize, passes: usize) {
    for _ in 0..passes {
        for k in 0..nk {
            let row = &mut values[k * nf..(k + 1) * nf];
            let old = row.to_vec();
            for f in 0..nf {
                let lo = old[f.saturating_sub(1)];
                let hi = old[(f + 1).min(nf - 1)];
                row[f] = 0.25 * lo + 0.5 * old[f] + 0.25 * hi;
            }
        }
        let old = values.to_vec();
        for k in 0..nk {
            for f in 0..nf {
                let lo = old[k.saturating_sub(1) * nf + f];
                let hi = old[(k + 1).min(nk - 1) * nf + f];
                values[k * nf + f] = 0.25 * lo + 0.5 * old[k * nf + f] + 0.25 * hi;
            }
        }
    }
}

/// Spectrum of a `[time][lat][lon]` series on latitudes `lats_deg` (south to
/// north, mirrored about the equator).
pub fn wk_from_series(series: &[&[f64]], lats_deg: &[f64], nlon: usize, steps_per_day: usize, params: &WkParams) -> Result<WkSpectrum> {
    let nlat = lats_deg.len();
    let rows: Vec<usize> = (0..nlat)
        .filter(|&i| lats_deg[i] >= 0.0 && lats_deg[i] <= params.lat_band_deg)
        .collect();
    if rows.is_empty() {
        return Err(Error::Invalid(format!("no latitude within {} degrees of the equator", params.lat_band_deg)));
    }
    let len = (params.segment_days * steps_per_day as f64).round() as usize;
    let overlap = (params.overlap_days * steps_per_day as f64).round() as usize;
    if len < 2 || overlap >= len {
        return Err(Error::Invalid("segment must be longer than its overlap".into()));
    }
    let hop = len - overlap;
    if series.len() < len + hop {
        return Err(Error::Invalid(format!(
            "{} steps cannot hold two {}-step segments",
            series.len(),
            len
        )));
    }
    if series.iter().any(|f| f.len() != nlat * nlon) {
        return Err(Error::Invalid("field size does not match the grid".into()));
    }
    let starts: Vec<usize> = (0..).map(|s| s * hop).take_while(|s| s + len <= series.len()).collect();
    let kmax = params.max_wavenumber as i32;
    let wavenumbers: Vec<i32> = (-kmax..=kmax).collect();
    let nf = len / 2 + 1;
    let nk = wavenumbers.len();
    let mut sym = vec![0.0; nk * nf];
    let mut anti = vec![0.0; nk * nf];
    let taper = hann(len);
    let mut planner = FftPlanner::new();
    let scale = 1.0 / (starts.len() * rows.len()) as f64;
    let mut block_s = vec![0.0; len * nlon];
    let mut block_a = vec![0.0; len * nlon];
    for &s in &starts {
        for &i in &rows {
            let mirror = nlat - 1 - i;
            for t in 0..len {
                let f = series[s + t];
                for j in 0..nlon {
                    let (n, m) = (f[i * nlon + j], f[mirror * nlon + j]);
                    block_s[t * nlon + j] = 0.5 * (n + m);
                    block_a[t * nlon + j] = 0.5 * (n - m);
                }
            }
            for (block, acc) in [(&mut block_s, &mut sym), (&mut block_a, &mut anti)] {
                detrend_taper(block, len, nlon, &taper);
                let p = segment_periodogram(block, len, nlon, &mut planner);
                for (ki, &k) in wavenumbers.iter().enumerate() {
                    // Eastward waves sit at lon index -k for positive frequencies.
                    let m = (-k).rem_euclid(nlon as i32) as usize;
                    if k.unsigned_abs() as usize > nlon / 2 {
                        continue;
                    }
                    for fi in 0..nf {
                        let two_sided = if fi == 0 || 2 * fi == len { 1.0 } else { 2.0 };
                        acc[ki * nf + fi] += scale * two_sided * p[fi * nlon + m];
                    }
                }
            }
        }
    }
    let background = (params.background_passes > 0).then(|| {
        let mut b: Vec<f64> = sym.iter().zip(&anti).map(|(a, b)| 0.5 * (a + b)).collect();
        smooth_121(&mut b, nk, nf, params.background_passes);
        b
    });
    Ok(WkSpectrum {
        wavenumbers,
        frequencies: (0..nf).map(|f| f as f64 * steps_per_day as f64 / len as f64).collect(),
        symmetric: sym,
        antisymmetric: anti,
        background,
        segments: starts.len(),
        segment_len: len,
        band_lats_deg: rows.iter().map(|&i| lats_deg[i]).collect(),
    })
}

/// Spectrum of one variable level of a trajectory.
pub fn wheeler_kiladis(traj: &FieldContainer, var: &str, level: usize, params: &WkParams) -> Result<WkSpectrum> {
    let grid = traj.header.grid()?;
    let series = field_series(traj, var, level)?;
    wk_from_series(&series, &grid.latitudes_deg(), grid.nlon, steps_per_day(traj)?, params)
}

//! Synthetic forced climate.
//!
//! Every prognostic field is an equilibrium response `E(forcings)` plus a
//! first-order autoregressive anomaly plus planted equatorial waves. `E` is a
//! zonally symmetric base state modulated by analytic insolation, the land-sea
//! mask, orography and CO2 (warming near the surface, cooling at the top).
//! Anomalies are spatially red noise with two vertical modes plus a white
//! grid-point share.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::data::container::{ContainerHeader, ContainerWriter, FieldContainer};
use crate::error::{Error, Result};
use crate::forcing::{self, MonthlySeries, MONTHS_PER_YEAR, STEPS_PER_YEAR, STEP_SECONDS, YEAR_SECONDS};
use crate::grid::GridSpec;
use crate::layout::{ChannelLayout, Role, VarSpec};
use crate::sht::{coeff_pairs, Sht, SpectralCoeffs};

/// Fixed land temperature written into the SST field.
pub const SST_LAND_FILL: f64 = 270.0;

const CO2_PROFILE_SIGMA: [f64; 8] = [0.025, 0.095, 0.20, 0.34, 0.51, 0.685, 0.835, 0.95];
const CO2_PROFILE_FACTOR: [f64; 8] = [-1.5, -0.8, 0.2, 0.6, 0.8, 0.9, 1.0, 1.0];

/// Share of the per-level noise amplitude carried by the vertically coherent modes.
const SHARED_WEIGHT: f64 = 0.5;
/// Share of the noise amplitude in uncorrelated grid-point noise, which puts
/// variance above the truncation as well.
const GRID_NOISE_WEIGHT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedWave {
    /// Signed zonal wavenumber; positive propagates eastward.
    pub wavenumber: i32,
    pub period_days: f64,
    pub amplitude: f64,
    /// Equatorially symmetric (true) or antisymmetric (false) meridional structure.
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub years: usize,
    pub start_year: i64,
    /// CO2 (ppm) at the first and last instant of the run; linear in between.
    pub co2_start: f64,
    pub co2_end: f64,
    /// CO2 at which the forced temperature offset vanishes.
    pub co2_reference: f64,
    /// Surface temperature response, K per ppm.
    pub forcing_sensitivity: f64,
    /// Anomaly standard deviation in temperature units; other variables scale with it.
    pub noise_amplitude: f64,
    /// Lag-one autocorrelation of the anomalies per 6-hour step.
    pub persistence: f64,
    /// Waves added to the zonal wind.
    pub waves: Vec<PlantedWave>,
    pub with_sst: bool,
    pub solar_constant: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            years: 10,
            start_year: 0,
            co2_start: 340.0,
            co2_end: 400.0,
            co2_reference: 340.0,
            forcing_sensitivity: 0.01,
            noise_amplitude: 1.0,
            persistence: 0.5,
            waves: vec![
                PlantedWave {
                    wavenumber: 3,
                    period_days: 10.0,
                    amplitude: 3.0,
                    symmetric: true,
                },
                PlantedWave {
                    wavenumber: -6,
                    period_days: 20.0,
                    amplitude: 2.0,
                    symmetric: false,
                },
            ],
            with_sst: false,
            solar_constant: forcing::SOLAR_CONSTANT,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.years == 0 {
            return Err(Error::Config("years must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return Err(Error::Config("persistence must lie in [0, 1)".into()));
        }
        if !(self.noise_amplitude >= 0.0) || !(self.co2_start > 0.0) || !(self.co2_end > 0.0) {
            return Err(Error::Config("noise must be >= 0 and CO2 positive".into()));
        }
        if self.waves.iter().any(|w| !(w.period_days > 0.0)) {
            return Err(Error::Config("wave periods must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.years * STEPS_PER_YEAR
    }

    pub fn time_start(&self) -> i64 {
        self.start_year * YEAR_SECONDS
    }

    /// CO2 growth in ppm per year.
    pub fn co2_rate(&self) -> f64 {
        (self.co2_end - self.co2_start) / self.years as f64
    }

    /// Surface temperature trend implied by the construction, K per decade.
    pub fn analytic_surface_trend(&self) -> f64 {
        self.forcing_sensitivity * self.co2_rate() * 10.0
    }

    /// Monthly CO2 anchors covering the run plus one month on each side.
    pub fn co2_series(&self) -> MonthlySeries {
        let first = self.start_year * MONTHS_PER_YEAR - 1;
        let n = self.years as i64 * MONTHS_PER_YEAR + 2;
        let (t0, t1) = (self.time_start() as f64, (self.time_start() + self.years as i64 * YEAR_SECONDS) as f64);
        let values = (0..n)
            .map(|k| {
                let t = MonthlySeries::anchor_time(first + k) as f64;
                self.co2_start + (self.co2_end - self.co2_start) * (t - t0) / (t1 - t0)
            })
            .collect();
        MonthlySeries::new(first, values).expect("finite anchors")
    }
}

/// Vertical weighting of the CO2 temperature response at sigma level `s`.
pub fn co2_level_factor(s: f64) -> f64 {
    let (xs, ys) = (&CO2_PROFILE_SIGMA, &CO2_PROFILE_FACTOR);
    if s <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if s <= xs[i] {
            let f = (s - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + f * (ys[i] - ys[i - 1]);
        }
    }
    ys[ys.len() - 1]
}

/// Container variables for the synthetic dataset, matching [`ChannelLayout::standard`].
pub fn synthetic_vars(nlevels: usize, with_sst: bool) -> Vec<VarSpec> {
    let layout = ChannelLayout::standard(nlevels, with_sst);
    let mut vars = layout.prognostic.clone();
    vars.extend(layout.diagnostic.iter().cloned());
    vars.extend(layout.forcing.iter().cloned());
    vars
}

/// Seeded continents: `(land_sea_mask, orography)`.
pub fn synthetic_surface(grid: &GridSpec, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a4d);
    let blobs: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-60f64..60.0).to_radians(),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(30f64..50.0).to_radians(),
            )
        })
        .collect();
    let lats = grid.latitudes();
    let lons = grid.longitudes();
    let mut lsm = Vec::with_capacity(grid.npoints());
    let mut orog = Vec::with_capacity(grid.npoints());
    for &phi in &lats {
        for &lam in &lons {
            let b: f64 = blobs
                .iter()
                .map(|&(p0, l0, r)| {
                    let c = (phi.sin() * p0.sin() + phi.cos() * p0.cos() * (lam - l0).cos()).clamp(-1.0, 1.0);
                    let d = c.acos();
                    (-d * d / (2.0 * r * r)).exp()
                })
                .sum();
            let m = ((b - 0.4) * 5.0).clamp(0.0, 1.0);
            lsm.push(m);
            orog.push(2000.0 * m * b.min(1.5));
        }
    }
    (lsm, orog)
}

/// Step-by-step generator. Each call to [`SyntheticClimate::next_step`]
/// returns one container time step.
pub struct SyntheticClimate {
    cfg: SynthConfig,
    grid: GridSpec,
    sht: Sht,
    header: ContainerHeader,
    co2: MonthlySeries,
    lsm: Vec<f64>,
    orography: Vec<f64>,
    anomaly: Vec<f64>,
    rng: ChaCha8Rng,
    profile: Vec<f64>,
    spectrum: Vec<f64>,
    step: usize,
}

const N_PROG_VARS: usize = 5;

impl SyntheticClimate {
    pub fn new(cfg: SynthConfig, grid: &GridSpec) -> Result<Self> {
        cfg.validate()?;
        let nlev = grid.nlevels();
        let mut header = ContainerHeader::new(grid, cfg.time_start(), STEP_SECONDS, synthetic_vars(nlev, cfg.with_sst))?;
        header.time_count = 0;
        let (lsm, orography) = synthetic_surface(grid, cfg.seed);
        let profile = grid.sigma_levels.iter().map(|s| 2.0 * s - 1.0).collect();
        // Red spectrum normalized to unit mean square. The global mean carries
        // noise too, so the emulator sees (and learns to damp) every degree.
        let pairs = coeff_pairs(grid.truncation);
        let mut spectrum: Vec<f64> = pairs.iter().map(|&(l, _)| 1.0 / (l as f64 + 1.0).sqrt()).collect();
        let energy: f64 = pairs
            .iter()
            .zip(&spectrum)
            .map(|(&(_, m), v)| if m == 0 { *v } else { 2.0 * v })
            .sum::<f64>()
            / (4.0 * PI);
        spectrum.iter_mut().for_each(|v| *v = (*v / energy).sqrt());
        let mut gen = Self {
            co2: cfg.co2_series(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            sht: Sht::new(grid),
            grid: grid.clone(),
            header,
            lsm,
            orography,
            anomaly: Vec::new(),
            profile,
            spectrum,
            step: 0,
        };
        gen.anomaly = gen.draw_noise();
        Ok(gen)
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn co2_series(&self) -> &MonthlySeries {
        &self.co2
    }

    pub fn land_sea_mask(&self) -> &[f64] {
        &self.lsm
    }

    pub fn orography(&self) -> &[f64] {
        &self.orography
    }

    fn n_prognostic(&self) -> usize {
        4 * self.grid.nlevels() + 1
    }

    fn var_amplitude(&self, var: usize) -> f64 {
        self.cfg.noise_amplitude
            * match var {
                0 => 4.0,
                1 => 0.1,
                2 => 4.0,
                3 => 2.0,
                _ => 0.04,
            }
    }

    fn random_field(&mut self) -> Vec<f64> {
        let pairs = coeff_pairs(self.grid.truncation);
        let mut coeffs = SpectralCoeffs::zeros(self.grid.truncation);
        for (idx, &(_, m)) in pairs.iter().enumerate() {
            let a: f64 = StandardNormal.sample(&mut self.rng);
            let b: f64 = StandardNormal.sample(&mut self.rng);
            let s = self.spectrum[idx];
            coeffs.coeffs[idx] = if m == 0 {
                Complex64::new(s * a, 0.0)
            } else {
                Complex64::new(s * a, s * b) * std::f64::consts::FRAC_1_SQRT_2
            };
        }
        self.sht.inverse(&coeffs).expect("matching truncation")
    }

    /// Spatially red noise for every prognostic channel. Multi-level variables
    /// mix a barotropic and a linear-in-sigma mode with an independent
    /// per-level field, keeping unit variance per level.
    fn draw_noise(&mut self) -> Vec<f64> {
        let np = self.grid.npoints();
        let nlev = self.grid.nlevels();
        let mut out = vec![0.0; self.n_prognostic() * np];
        if self.cfg.noise_amplitude == 0.0 {
            return out;
        }
        for var in 0..N_PROG_VARS {
            let amp = self.var_amplitude(var);
            if var == 4 {
                let f = self.random_field();
                out[4 * nlev * np..].iter_mut().zip(&f).for_each(|(d, v)| *d = amp * v);
                self.add_grid_noise(&mut out[4 * nlev * np..], amp);
                continue;
            }
            let f0 = self.random_field();
            let f1 = self.random_field();
            for k in 0..nlev {
                let own = self.random_field();
                let p = self.profile[k];
                let norm = SHARED_WEIGHT * amp / (1.0 + p * p).sqrt();
                let own_amp = (1.0 - SHARED_WEIGHT * SHARED_WEIGHT).sqrt() * amp;
                let ch = var * nlev + k;
                for (i, d) in out[ch * np..(ch + 1) * np].iter_mut().enumerate() {
                    *d = norm * (f0[i] + p * f1[i]) + own_amp * own[i];
                }
                self.add_grid_noise(&mut out[ch * np..(ch + 1) * np], amp);
            }
        }
        out
    }

    /// Mixes white grid-point noise into a unit-variance red field `d`,
    /// keeping the total variance at `amp²`.
    fn add_grid_noise(&mut self, d: &mut [f64], amp: f64) {
        let red = (1.0 - GRID_NOISE_WEIGHT * GRID_NOISE_WEIGHT).sqrt();
        for v in d.iter_mut() {
            let w: f64 = StandardNormal.sample(&mut self.rng);
            *v = red * *v + GRID_NOISE_WEIGHT * amp * w;
        }
    }

    /// Equilibrium prognostic channels `[33][lat][lon]` for insolation `tisr` and CO2 `co2`.
    pub fn equilibrium(&self, tisr: &[f64], co2: f64) -> Vec<f64> {
        equilibrium_state(&self.grid, tisr, co2, &self.lsm, &self.orography, &self.cfg)
    }

    /// Sum of planted waves at time `t` (seconds) on the grid.
    pub fn waves(&self, t: i64) -> Vec<f64> {
        planted_waves(&self.grid, &self.cfg.waves, t)
    }

    pub fn next_step(&mut self) -> Result<Vec<f64>> {
        let t = self.cfg.time_start() + self.step as i64 * STEP_SECONDS;
        let np = self.grid.npoints();
        let nlev = self.grid.nlevels();
        let tisr = forcing::tisr_field(&self.grid, t, self.cfg.solar_constant);
        let co2 = forcing::interpolate_co2(&self.co2, t)?;
        let mut prog = self.equilibrium(&tisr, co2);
        let waves = self.waves(t);
        for (ch, chunk) in prog.chunks_mut(np).enumerate() {
            let var = if ch == 4 * nlev { 4 } else { ch / nlev };
            let a = &self.anomaly[ch * np..(ch + 1) * np];
            match var {
                1 => chunk.iter_mut().zip(a).for_each(|(v, a)| *v = (*v * (1.0 + a)).max(0.0)),
                2 => chunk.iter_mut().zip(a).zip(&waves).for_each(|((v, a), w)| *v += a + w),
                _ => chunk.iter_mut().zip(a).for_each(|(v, a)| *v += a),
            }
        }
        let sh_surf = &prog[(2 * nlev - 1) * np..2 * nlev * np];
        let tp: Vec<f64> = sh_surf.iter().map(|q| precipitation(*q)).collect();
        let mut step = prog.clone();
        step.extend_from_slice(&tp);
        step.extend_from_slice(&self.orography);
        step.extend_from_slice(&tisr);
        step.extend_from_slice(&self.lsm);
        step.extend(std::iter::repeat(co2).take(np));
        if self.cfg.with_sst {
            let t_surf = &prog[(nlev - 1) * np..nlev * np];
            step.extend(t_surf.iter().zip(&self.lsm).map(|(t, m)| if *m >= 0.5 { SST_LAND_FILL } else { *t }));
        }

        let phi = self.cfg.persistence;
        let innov = (1.0 - phi * phi).sqrt();
        let noise = self.draw_noise();
        self.anomaly.iter_mut().zip(&noise).for_each(|(a, n)| *a = phi * *a + innov * n);
        self.step += 1;
        Ok(step)
    }
}

/// Precipitation per step as a function of near-surface humidity.
pub fn precipitation(q: f64) -> f64 {
    let r = q.max(0.0) / 0.015;
    0.002 * r * r
}

pub fn equilibrium_state(grid: &GridSpec, tisr: &[f64], co2: f64, lsm: &[f64], orog: &[f64], cfg: &SynthConfig) -> Vec<f64> {
    let np = grid.npoints();
    let nlev = grid.nlevels();
    let lats = grid.latitudes();
    let mut out = vec![0.0; (4 * nlev + 1) * np];
    let dco2 = cfg.forcing_sensitivity * (co2 - cfg.co2_reference);
    for (k, &s) in grid.sigma_levels.iter().enumerate() {
        let t_base = 200.0 + 88.0 * s.powf(0.25);
        let fco2 = co2_level_factor(s);
        for i in 0..grid.nlat {
            let phi = lats[i];
            for j in 0..grid.nlon {
                let p = i * grid.nlon + j;
                let q = tisr[p] - 340.0;
                let t = t_base + 0.08 * (0.3 + 0.7 * s) * q + 0.03 * lsm[p] * q * s - 0.0065 * orog[p] * s * s + dco2 * fco2;
                out[k * np + p] = t;
                out[(nlev + k) * np + p] = (3e-4 * (t - 230.0) * s * s).max(0.0);
                out[(2 * nlev + k) * np + p] =
                    25.0 * (1.0 - tisr[p] / 300.0) * (1.0 - s).powi(2) + 12.0 * (2.0 * phi).sin().powi(2) * (0.5 + s);
                out[(3 * nlev + k) * np + p] = 2.0 * (2.0 * phi).sin() * (2.0 * s - 1.0);
            }
        }
    }
    for p in 0..np {
        out[4 * nlev * np + p] = 101_300f64.ln() - orog[p] / 8000.0 + 1e-5 * (tisr[p] - 340.0);
    }
    out
}

pub fn planted_waves(grid: &GridSpec, waves: &[PlantedWave], t: i64) -> Vec<f64> {
    let lats = grid.latitudes();
    let lons = grid.longitudes();
    let days = t as f64 / forcing::DAY_SECONDS as f64;
    let width = 20f64.to_radians();
    let mut out = vec![0.0; grid.npoints()];
    for w in waves {
        let omega = 2.0 * PI / w.period_days;
        for (i, &phi) in lats.iter().enumerate() {
            let y = phi / width;
            let g = if w.symmetric { (-y * y).exp() } else { y * (-y * y).exp() };
            for (j, &lam) in lons.iter().enumerate() {
                out[i * grid.nlon + j] += w.amplitude * g * (w.wavenumber as f64 * lam - omega * days).cos();
            }
        }
    }
    out
}

/// Generates the full dataset in memory.
pub fn generate_synthetic_climate(cfg: &SynthConfig, grid: &GridSpec) -> Result<FieldContainer> {
    let mut gen = SyntheticClimate::new(cfg.clone(), grid)?;
    let mut c = FieldContainer::new(gen.header().clone())?;
    c.data.reserve(cfg.steps() * c.header.step_len());
    for _ in 0..cfg.steps() {
        let step = gen.next_step()?;
        c.push_step(&step)?;
    }
    Ok(c)
}

/// Streams the dataset to a container file.
pub fn write_synthetic_climate(cfg: &SynthConfig, grid: &GridSpec, path: impl AsRef<Path>) -> Result<ContainerHeader> {
    let mut gen = SyntheticClimate::new(cfg.clone(), grid)?;
    let mut w = ContainerWriter::create(path, gen.header().clone())?;
    for _ in 0..cfg.steps() {
        w.write_step(&gen.next_step()?)?;
    }
    let mut header = gen.header().clone();
    header.time_count = w.finish()?;
    Ok(header)
}

/// Names of the container variables with a given role.
pub fn vars_with_role(header: &ContainerHeader, role: Role) -> Vec<String> {
    header.vars.iter().filter(|v| v.role == role).map(|v| v.name.clone()).collect()
}

//! Quadrature-based spherical harmonic transforms on a Gaussian grid.
//!
//! Harmonics are orthonormal on the unit sphere, `Y_lm = P̄_lm(sin φ) e^{imλ}`
//! with `∫ |Y_lm|² dΩ = 1`, and carry no Condon-Shortley phase. Only orders
//! `m >= 0` are stored; a real field is reconstructed through
//! `a_{l,-m} = (-1)^m conj(a_lm)`.
//!
//! Coefficients are laid out order-major: all degrees of `m = 0`, then all
//! degrees of `m = 1`, and so on. Interleaved `[re, im]` pairs are used by the
//! low-level kernels so that the autodiff tape can treat them as reals.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::grid::GridSpec;

/// Number of stored coefficients for triangular truncation `l <= truncation`.
pub fn num_coeffs(truncation: usize) -> usize {
    (truncation + 1) * (truncation + 2) / 2
}

/// Storage index of coefficient `(l, m)`.
pub fn coeff_index(truncation: usize, l: usize, m: usize) -> usize {
    debug_assert!(m <= l && l <= truncation);
    m * (truncation + 1) - m * m.saturating_sub(1) / 2 + (l - m)
}

/// Degree/order pairs in storage order.
pub fn coeff_pairs(truncation: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_coeffs(truncation));
    for m in 0..=truncation {
        for l in m..=truncation {
            out.push((l, m));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub truncation: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn zeros(truncation: usize) -> Self {
        Self {
            truncation,
            coeffs: vec![Complex64::new(0.0, 0.0); num_coeffs(truncation)],
        }
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.coeffs[coeff_index(self.truncation, l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, value: Complex64) {
        let idx = coeff_index(self.truncation, l, m);
        self.coeffs[idx] = value;
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn from_interleaved(truncation: usize, data: &[f64]) -> Result<Self> {
        if data.len() != 2 * num_coeffs(truncation) {
            return Err(Error::Shape {
                expected: vec![num_coeffs(truncation), 2],
                got: vec![data.len()],
            });
        }
        Ok(Self {
            truncation,
            coeffs: data
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        })
    }

    /// Σ over all orders, including the implied negative ones, of |a_lm|².
    pub fn energy(&self) -> f64 {
        coeff_pairs(self.truncation)
            .iter()
            .zip(&self.coeffs)
            .map(|(&(_, m), c)| if m == 0 { c.norm_sqr() } else { 2.0 * c.norm_sqr() })
            .sum()
    }
}

/// Precomputed transform tables for one grid. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct Sht {
    grid: GridSpec,
    ncoef: usize,
    /// `[lat][coef]` normalized associated Legendre values.
    pbar: Vec<f64>,
    /// `[m][lon]`
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    /// Quadrature factor `w_i · 2π / nlon` per latitude row.
    analysis_scale: Vec<f64>,
}

impl Sht {
    pub fn new(grid: &GridSpec) -> Self {
        let l_max = grid.truncation;
        let ncoef = num_coeffs(l_max);
        let mut pbar = vec![0.0; grid.nlat * ncoef];
        for (i, &x) in grid.gauss_nodes.iter().enumerate() {
            let row = normalized_legendre(l_max, x);
            pbar[i * ncoef..(i + 1) * ncoef].copy_from_slice(&row);
        }
        let mut cos_tab = vec![0.0; (l_max + 1) * grid.nlon];
        let mut sin_tab = vec![0.0; (l_max + 1) * grid.nlon];
        for m in 0..=l_max {
            for j in 0..grid.nlon {
                // Reduce m·j modulo nlon so that the tables are exact under rotation.
                let phase = 2.0 * PI * ((m * j) % grid.nlon) as f64 / grid.nlon as f64;
                cos_tab[m * grid.nlon + j] = phase.cos();
                sin_tab[m * grid.nlon + j] = phase.sin();
            }
        }
        let analysis_scale = grid
            .gauss_weights
            .iter()
            .map(|w| w * 2.0 * PI / grid.nlon as f64)
            .collect();
        Self {
            grid: grid.clone(),
            ncoef,
            pbar,
            cos_tab,
            sin_tab,
            analysis_scale,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.grid.truncation
    }

    pub fn ncoef(&self) -> usize {
        self.ncoef
    }

    pub fn npoints(&self) -> usize {
        self.grid.npoints()
    }

    /// P̄_lm at latitude row `lat` (storage order).
    pub fn legendre_row(&self, lat: usize) -> &[f64] {
        &self.pbar[lat * self.ncoef..(lat + 1) * self.ncoef]
    }

    pub fn forward(&self, field: &[f64]) -> Result<SpectralCoeffs> {
        self.grid.check_field(field)?;
        ensure_finite(field, "sht_forward input")?;
        let mut out = vec![0.0; 2 * self.ncoef];
        self.analysis(field, Some(&self.analysis_scale), &mut out);
        SpectralCoeffs::from_interleaved(self.truncation(), &out)
    }

    pub fn inverse(&self, coeffs: &SpectralCoeffs) -> Result<Vec<f64>> {
        if coeffs.truncation != self.truncation() {
            return Err(Error::Truncation {
                expected: self.truncation(),
                got: coeffs.truncation,
            });
        }
        let mut out = vec![0.0; self.npoints()];
        self.synthesis(&coeffs.to_interleaved(), 2.0, None, &mut out);
        Ok(out)
    }

    /// Interleaved forward analysis, `out` has `2 · ncoef` entries.
    pub fn forward_raw(&self, field: &[f64], out: &mut [f64]) {
        self.analysis(field, Some(&self.analysis_scale), out);
    }

    /// Interleaved inverse synthesis, `out` has `nlat · nlon` entries.
    pub fn inverse_raw(&self, coeffs: &[f64], out: &mut [f64]) {
        self.synthesis(coeffs, 2.0, None, out);
    }

    /// Exact adjoint of [`Sht::forward_raw`]: maps a spectral cotangent to grid space.
    pub fn forward_adjoint_raw(&self, cotangent: &[f64], out: &mut [f64]) {
        self.synthesis(cotangent, 1.0, Some(&self.analysis_scale), out);
    }

    /// Exact adjoint of [`Sht::inverse_raw`]: maps a grid cotangent to spectral space.
    pub fn inverse_adjoint_raw(&self, cotangent: &[f64], out: &mut [f64]) {
        self.analysis(cotangent, None, out);
        let l_max = self.truncation();
        for m in 1..=l_max {
            for l in m..=l_max {
                let k = coeff_index(l_max, l, m);
                out[2 * k] *= 2.0;
                out[2 * k + 1] *= 2.0;
            }
        }
    }

    /// `out_lm = Σ_i s_i P̄_lm(x_i) Σ_j f_ij e^{-imλ_j}`; overwrites `out`.
    fn analysis(&self, field: &[f64], lat_scale: Option<&[f64]>, out: &mut [f64]) {
        let nlon = self.grid.nlon;
        let l_max = self.truncation();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut fourier = vec![0.0; 2 * (l_max + 1)];
        for i in 0..self.grid.nlat {
            let row = &field[i * nlon..(i + 1) * nlon];
            let scale = lat_scale.map_or(1.0, |s| s[i]);
            for m in 0..=l_max {
                let c = &self.cos_tab[m * nlon..(m + 1) * nlon];
                let s = &self.sin_tab[m * nlon..(m + 1) * nlon];
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..nlon {
                    re += row[j] * c[j];
                    im -= row[j] * s[j];
                }
                fourier[2 * m] = re * scale;
                fourier[2 * m + 1] = im * scale;
            }
            let p = self.legendre_row(i);
            let mut k = 0;
            for m in 0..=l_max {
                let (re, im) = (fourier[2 * m], fourier[2 * m + 1]);
                for _l in m..=l_max {
                    out[2 * k] += p[k] * re;
                    out[2 * k + 1] += p[k] * im;
                    k += 1;
                }
            }
        }
    }

    /// `out_ij = s_i Σ_m c_m Re(Σ_l a_lm P̄_lm(x_i) e^{imλ_j})` with `c_0 = 1`
    /// and `c_m = m_factor` for `m > 0`; overwrites `out`.
    fn synthesis(&self, coeffs: &[f64], m_factor: f64, lat_scale: Option<&[f64]>, out: &mut [f64]) {
        let nlon = self.grid.nlon;
        let l_max = self.truncation();
        let mut g = vec![0.0; 2 * (l_max + 1)];
        for i in 0..self.grid.nlat {
            let p = self.legendre_row(i);
            let mut k = 0;
            for m in 0..=l_max {
                let mut re = 0.0;
                let mut im = 0.0;
                for _l in m..=l_max {
                    re += p[k] * coeffs[2 * k];
                    im += p[k] * coeffs[2 * k + 1];
                    k += 1;
                }
                let f = if m == 0 { 1.0 } else { m_factor };
                g[2 * m] = re * f;
                g[2 * m + 1] = im * f;
            }
            let scale = lat_scale.map_or(1.0, |s| s[i]);
            let row = &mut out[i * nlon..(i + 1) * nlon];
            row.iter_mut().for_each(|v| *v = g[0]);
            for m in 1..=l_max {
                let c = &self.cos_tab[m * nlon..(m + 1) * nlon];
                let s = &self.sin_tab[m * nlon..(m + 1) * nlon];
                let (re, im) = (g[2 * m], g[2 * m + 1]);
                for j in 0..nlon {
                    row[j] += re * c[j] - im * s[j];
                }
            }
            if scale != 1.0 {
                row.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
}

/// Orthonormal associated Legendre functions P̄_lm(x) for all `m <= l <= l_max`,
/// in storage order, by the standard stable three-term recurrence.
pub fn normalized_legendre(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; num_coeffs(l_max)];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut p_mm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            p_mm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        let base = coeff_index(l_max, m, m);
        out[base] = p_mm;
        if m == l_max {
            break;
        }
        let mf = m as f64;
        let mut p_lm2 = p_mm;
        let mut p_lm1 = (2.0 * mf + 3.0).sqrt() * x * p_mm;
        out[base + 1] = p_lm1;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let p = a * (x * p_lm1 - b * p_lm2);
            out[base + (l - m)] = p;
            p_lm2 = p_lm1;
            p_lm1 = p;
        }
    }
    out
}

pub fn sht_forward(field: &[f64], grid: &GridSpec) -> Result<SpectralCoeffs> {
    Sht::new(grid).forward(field)
}

pub fn sht_inverse(coeffs: &SpectralCoeffs, grid: &GridSpec) -> Result<Vec<f64>> {
    Sht::new(grid).inverse(coeffs)
}

/// Exact area mean `Σ_ij w_i f_ij / (2 · nlon)` under Gaussian quadrature.
pub fn quadrature_mean(field: &[f64], grid: &GridSpec) -> Result<f64> {
    grid.check_field(field)?;
    Ok(quadrature_mean_unchecked(field, grid))
}

pub(crate) fn quadrature_mean_unchecked(field: &[f64], grid: &GridSpec) -> f64 {
    let nlon = grid.nlon;
    let mut acc = 0.0;
    for (i, w) in grid.gauss_weights.iter().enumerate() {
        let row: f64 = field[i * nlon..(i + 1) * nlon].iter().sum();
        acc += w * row;
    }
    acc / (2.0 * nlon as f64)
}

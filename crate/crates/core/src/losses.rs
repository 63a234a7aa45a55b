//! Training objectives.
//!
//! Prognostic tendencies use the area-exact quadrature-weighted L2; the
//! diagnostic precipitation channel uses a plain unweighted L2. Per-channel
//! weights follow the validation-loss-scaled scheme `w = 0.005 / val_loss`,
//! refreshed every 10 epochs from epoch 20, with logP and TP further halved.
//! A zonal log-amplitude spectrum penalty is switched on for fine-tuning.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::{NodeId, Tape};

/// Smallest validation loss accepted as a denominator.
pub const VAL_LOSS_FLOOR: f64 = 1e-8;
/// Offset inside the regularizer logarithm.
pub const SPECTRUM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Quadrature-weighted L2 (prognostic tendencies).
    Weighted,
    /// Unweighted L2 (diagnostic output).
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub channels: Vec<String>,
    pub kinds: Vec<LossKind>,
    pub weights: Vec<f64>,
    /// Channels excluded from the loss (degenerate normalization); weight stays 0.
    pub excluded: Vec<bool>,
    /// Variable name → multiplicative factor applied after every adaptive update.
    pub manual_factors: Vec<(String, f64)>,
    pub update_epoch_interval: usize,
    pub activation_epoch: usize,
    pub scale_constant: f64,
}

impl LossWeights {
    /// Unit weights with the manual logP/TP factors already applied.
    /// Weighted channels must precede plain ones.
    pub fn new(channels: Vec<String>, kinds: Vec<LossKind>) -> Result<Self> {
        if channels.len() != kinds.len() {
            return Err(Error::Invalid("channel and kind lists differ in length".into()));
        }
        if kinds.windows(2).any(|w| w[0] == LossKind::Plain && w[1] == LossKind::Weighted) {
            return Err(Error::Invalid("weighted channels must precede plain channels".into()));
        }
        let n = channels.len();
        let mut w = Self {
            channels,
            kinds,
            weights: vec![1.0; n],
            excluded: vec![false; n],
            manual_factors: vec![("logP".into(), 0.5), ("TP".into(), 0.5)],
            update_epoch_interval: 10,
            activation_epoch: 20,
            scale_constant: 0.005,
        };
        w.apply_manual_factors();
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_weighted(&self) -> usize {
        self.kinds.iter().filter(|k| **k == LossKind::Weighted).count()
    }

    pub fn exclude(&mut self, channel: usize) {
        self.excluded[channel] = true;
        self.weights[channel] = 0.0;
    }

    pub fn weight_of(&self, channel: &str) -> Option<f64> {
        self.channels.iter().position(|c| c == channel).map(|i| self.weights[i])
    }

    fn manual_factor(&self, channel: &str) -> f64 {
        let var = channel.split('@').next().unwrap_or(channel);
        self.manual_factors
            .iter()
            .filter(|(v, _)| v == var)
            .map(|(_, f)| *f)
            .product()
    }

    fn apply_manual_factors(&mut self) {
        for i in 0..self.weights.len() {
            let f = self.manual_factor(&self.channels[i]);
            self.weights[i] *= f;
        }
    }

    /// Whether the adaptive scheme refreshes the weights at the start of `epoch`.
    pub fn is_update_epoch(&self, epoch: usize) -> bool {
        epoch >= self.activation_epoch && (epoch - self.activation_epoch) % self.update_epoch_interval == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveUpdate {
    pub weights: LossWeights,
    pub updated: bool,
    /// Channels whose validation loss was clamped at [`VAL_LOSS_FLOOR`].
    pub clamped: Vec<String>,
}

/// Validation-loss-scaled reweighting, `w(v) = c / val_loss(v)` then manual factors.
pub fn update_adaptive_weights(val_losses: &[f64], weights: &LossWeights, epoch: usize) -> Result<AdaptiveUpdate> {
    if val_losses.len() != weights.len() {
        return Err(Error::Shape {
            expected: vec![weights.len()],
            got: vec![val_losses.len()],
        });
    }
    if !weights.is_update_epoch(epoch) {
        return Ok(AdaptiveUpdate {
            weights: weights.clone(),
            updated: false,
            clamped: Vec::new(),
        });
    }
    let mut next = weights.clone();
    let mut clamped = Vec::new();
    for (i, &v) in val_losses.iter().enumerate() {
        if next.excluded[i] {
            next.weights[i] = 0.0;
            continue;
        }
        let denom = if v.is_finite() && v > VAL_LOSS_FLOOR {
            v
        } else {
            clamped.push(next.channels[i].clone());
            VAL_LOSS_FLOOR
        };
        next.weights[i] = next.scale_constant / denom;
    }
    next.apply_manual_factors();
    Ok(AdaptiveUpdate {
        weights: next,
        updated: true,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerConfig {
    pub weight: f64,
    /// Fraction of the resolved zonal wavenumbers (highest first) that are penalized.
    pub wavenumber_band: f64,
    pub active: bool,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            weight: 5e-2,
            wavenumber_band: 1.0 / 3.0,
            active: false,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0) {
            return Err(Error::Invalid("regularizer weight must be >= 0".into()));
        }
        if !(self.wavenumber_band > 0.0 && self.wavenumber_band <= 1.0) {
            return Err(Error::Invalid("wavenumber band must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Penalized zonal wavenumbers: the top `band` fraction of `0..=truncation`.
pub fn penalized_wavenumbers(truncation: usize, band: f64) -> Vec<usize> {
    let total = truncation + 1;
    let count = ((band * total as f64) - 1e-9).ceil().clamp(1.0, total as f64) as usize;
    (total - count..total).collect()
}

/// Precomputed zonal DFT tables for the spectral regularizer.
#[derive(Debug, Clone)]
pub struct ZonalSpectrumLoss {
    nlat: usize,
    nlon: usize,
    lat_weights: Vec<f64>,
    wavenumbers: Vec<usize>,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    lambda: f64,
}

impl ZonalSpectrumLoss {
    pub fn new(grid: &GridSpec, config: &RegularizerConfig) -> Result<Self> {
        config.validate()?;
        let wavenumbers = penalized_wavenumbers(grid.truncation, config.wavenumber_band);
        let total: f64 = grid.gauss_weights.iter().sum();
        let nlon = grid.nlon;
        let mut cos_tab = Vec::with_capacity(wavenumbers.len() * nlon);
        let mut sin_tab = Vec::with_capacity(wavenumbers.len() * nlon);
        for &k in &wavenumbers {
            for j in 0..nlon {
                let ph = 2.0 * PI * ((k * j) % nlon) as f64 / nlon as f64;
                cos_tab.push(ph.cos());
                sin_tab.push(ph.sin());
            }
        }
        Ok(Self {
            nlat: grid.nlat,
            nlon,
            lat_weights: grid.gauss_weights.iter().map(|w| w / total).collect(),
            wavenumbers,
            cos_tab,
            sin_tab,
            lambda: if config.active { config.weight } else { 0.0 },
        })
    }

    pub fn npoints(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn wavenumbers(&self) -> &[usize] {
        &self.wavenumbers
    }

    /// Per-latitude Fourier coefficients `(re, im)` for penalized wavenumbers of one channel.
    fn fourier(&self, field: &[f64]) -> Vec<(f64, f64)> {
        let nlon = self.nlon;
        let mut out = Vec::with_capacity(self.nlat * self.wavenumbers.len());
        for i in 0..self.nlat {
            let row = &field[i * nlon..(i + 1) * nlon];
            for kk in 0..self.wavenumbers.len() {
                let c = &self.cos_tab[kk * nlon..(kk + 1) * nlon];
                let s = &self.sin_tab[kk * nlon..(kk + 1) * nlon];
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..nlon {
                    re += row[j] * c[j];
                    im -= row[j] * s[j];
                }
                out.push((re, im));
            }
        }
        out
    }

    /// Latitude-averaged amplitude `Σ_i ŵ_i |F_ik| / nlon` for each penalized k.
    fn mean_amplitude(&self, fourier: &[(f64, f64)]) -> Vec<f64> {
        let nk = self.wavenumbers.len();
        let mut amp = vec![0.0; nk];
        for i in 0..self.nlat {
            for kk in 0..nk {
                let (re, im) = fourier[i * nk + kk];
                amp[kk] += self.lat_weights[i] * (re * re + im * im).sqrt() / self.nlon as f64;
            }
        }
        amp
    }

    /// Zonal amplitude spectrum (penalized wavenumbers) of one field.
    pub fn amplitude_spectrum(&self, field: &[f64]) -> Vec<f64> {
        self.mean_amplitude(&self.fourier(field))
    }

    pub fn value(&self, pred: &[f64], target: &[f64], channels: usize) -> f64 {
        if self.lambda == 0.0 || channels == 0 {
            return 0.0;
        }
        let npts = self.npoints();
        let nk = self.wavenumbers.len();
        let mut acc = 0.0;
        for c in 0..channels {
            let ap = self.amplitude_spectrum(&pred[c * npts..(c + 1) * npts]);
            let at = self.amplitude_spectrum(&target[c * npts..(c + 1) * npts]);
            for kk in 0..nk {
                let d = (ap[kk] + SPECTRUM_EPS).ln() - (at[kk] + SPECTRUM_EPS).ln();
                acc += d * d;
            }
        }
        self.lambda * acc / (channels * nk) as f64
    }

    /// Accumulates `upstream · ∂value/∂pred` into `grad`.
    pub fn gradient(&self, pred: &[f64], target: &[f64], channels: usize, upstream: f64, grad: &mut [f64]) {
        if self.lambda == 0.0 || channels == 0 {
            return;
        }
        let npts = self.npoints();
        let nk = self.wavenumbers.len();
        let nlon = self.nlon;
        let norm = upstream * self.lambda / (channels * nk) as f64;
        for c in 0..channels {
            let fp = self.fourier(&pred[c * npts..(c + 1) * npts]);
            let ap = self.mean_amplitude(&fp);
            let at = self.amplitude_spectrum(&target[c * npts..(c + 1) * npts]);
            let d_amp: Vec<f64> = (0..nk)
                .map(|kk| {
                    let d = (ap[kk] + SPECTRUM_EPS).ln() - (at[kk] + SPECTRUM_EPS).ln();
                    norm * 2.0 * d / (ap[kk] + SPECTRUM_EPS)
                })
                .collect();
            let gc = &mut grad[c * npts..(c + 1) * npts];
            for i in 0..self.nlat {
                let row = &mut gc[i * nlon..(i + 1) * nlon];
                for kk in 0..nk {
                    let (re, im) = fp[i * nk + kk];
                    let mag = (re * re + im * im).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let s = d_amp[kk] * self.lat_weights[i] / (nlon as f64 * mag);
                    let (gr, gi) = (s * re, s * im);
                    let ct = &self.cos_tab[kk * nlon..(kk + 1) * nlon];
                    let st = &self.sin_tab[kk * nlon..(kk + 1) * nlon];
                    for j in 0..nlon {
                        row[j] += gr * ct[j] - gi * st[j];
                    }
                }
            }
        }
    }
}

/// Quadrature-weighted squared error summed over channels with `weights`;
/// optionally accumulates `upstream · gradient` into the provided buffer.
pub(crate) fn weighted_l2_kernel(
    pred: &[f64],
    target: &[f64],
    weights: &[f64],
    grid: &GridSpec,
    grad: Option<(&mut Vec<f64>, f64)>,
) -> f64 {
    let npts = grid.npoints();
    let nlon = grid.nlon;
    let denom = 2.0 * nlon as f64;
    let mut total = 0.0;
    let mut grad = grad;
    for (c, &wc) in weights.iter().enumerate() {
        if wc == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for i in 0..grid.nlat {
            let gw = grid.gauss_weights[i];
            let off = c * npts + i * nlon;
            let mut row = 0.0;
            for j in 0..nlon {
                let d = pred[off + j] - target[off + j];
                row += d * d;
                if let Some((g, up)) = grad.as_mut() {
                    g[off + j] += *up * wc * gw * 2.0 * d / denom;
                }
            }
            acc += gw * row;
        }
        total += wc * acc / denom;
    }
    total
}

pub(crate) fn plain_l2_kernel(pred: &[f64], target: &[f64], weights: &[f64], grad: Option<(&mut Vec<f64>, f64)>) -> f64 {
    let npts = pred.len() / weights.len().max(1);
    let mut total = 0.0;
    let mut grad = grad;
    for (c, &wc) in weights.iter().enumerate() {
        if wc == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for p in c * npts..(c + 1) * npts {
            let d = pred[p] - target[p];
            acc += d * d;
            if let Some((g, up)) = grad.as_mut() {
                g[p] += *up * wc * 2.0 * d / npts as f64;
            }
        }
        total += wc * acc / npts as f64;
    }
    total
}

/// Area-exact mean squared error of one field.
pub fn weighted_l2(pred: &[f64], target: &[f64], grid: &GridSpec) -> Result<f64> {
    grid.check_field(pred)?;
    grid.check_field(target)?;
    Ok(weighted_l2_kernel(pred, target, &[1.0], grid, None))
}

/// Unweighted mean squared error over all points.
pub fn plain_l2(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape {
            expected: vec![target.len()],
            got: vec![pred.len()],
        });
    }
    Ok(plain_l2_kernel(pred, target, &[1.0], None))
}

/// Spectral regularizer over `channels` stacked fields `[C, nlat, nlon]`.
pub fn spectral_regularizer(pred: &[f64], target: &[f64], channels: usize, config: &RegularizerConfig, grid: &GridSpec) -> Result<f64> {
    if pred.len() != target.len() || pred.len() != channels * grid.npoints() {
        return Err(Error::Shape {
            expected: vec![channels, grid.nlat, grid.nlon],
            got: vec![pred.len()],
        });
    }
    Ok(ZonalSpectrumLoss::new(grid, config)?.value(pred, target, channels))
}

/// Components of a combined loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub weighted: f64,
    pub plain: f64,
    pub regularizer: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.weighted + self.plain + self.regularizer
    }
}

fn split_weights(weights: &LossWeights) -> (usize, Vec<f64>, Vec<f64>) {
    let nw = weights.n_weighted();
    (nw, weights.weights[..nw].to_vec(), weights.weights[nw..].to_vec())
}

/// Combined objective on stacked `[C, nlat, nlon]` outputs, evaluated directly.
pub fn total_loss(
    pred: &[f64],
    target: &[f64],
    weights: &LossWeights,
    reg: &RegularizerConfig,
    grid: &GridSpec,
) -> Result<LossBreakdown> {
    let npts = grid.npoints();
    if pred.len() != target.len() || pred.len() != weights.len() * npts {
        return Err(Error::Shape {
            expected: vec![weights.len(), grid.nlat, grid.nlon],
            got: vec![pred.len()],
        });
    }
    let (nw, ww, wp) = split_weights(weights);
    let weighted = weighted_l2_kernel(&pred[..nw * npts], &target[..nw * npts], &ww, grid, None);
    let plain = if wp.is_empty() {
        0.0
    } else {
        plain_l2_kernel(&pred[nw * npts..], &target[nw * npts..], &wp, None)
    };
    let regularizer = if reg.active {
        ZonalSpectrumLoss::new(grid, reg)?.value(&pred[..nw * npts], &target[..nw * npts], nw)
    } else {
        0.0
    };
    Ok(LossBreakdown {
        weighted,
        plain,
        regularizer,
    })
}

/// Node ids of a loss recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: NodeId,
    pub weighted: NodeId,
    pub plain: Option<NodeId>,
    pub regularizer: Option<NodeId>,
}

/// Records the combined objective on `tape` for a `[C, nlat, nlon]` prediction node.
pub fn total_loss_on_tape(
    tape: &mut Tape,
    pred: NodeId,
    target: &[f64],
    weights: &LossWeights,
    spectrum: Option<&Arc<ZonalSpectrumLoss>>,
    grid: &Arc<GridSpec>,
) -> Result<LossNodes> {
    let npts = grid.npoints();
    let (nw, ww, wp) = split_weights(weights);
    let c = tape.value(pred).channels();
    if c != weights.len() || target.len() != c * npts {
        return Err(Error::Shape {
            expected: vec![weights.len(), grid.nlat, grid.nlon],
            got: tape.value(pred).shape.clone(),
        });
    }
    let prog = if nw == c { pred } else { tape.narrow(pred, 0, nw)? };
    let prog_target = Arc::new(target[..nw * npts].to_vec());
    let weighted = tape.weighted_l2(prog, prog_target.clone(), ww, grid)?;
    let mut total = weighted;
    let mut plain = None;
    if !wp.is_empty() {
        let diag = tape.narrow(pred, nw, c - nw)?;
        let node = tape.plain_l2(diag, Arc::new(target[nw * npts..].to_vec()), wp)?;
        total = tape.add(total, node)?;
        plain = Some(node);
    }
    let mut regularizer = None;
    if let Some(spec) = spectrum {
        let node = tape.spectral_reg(prog, prog_target, spec)?;
        total = tape.add(total, node)?;
        regularizer = Some(node);
    }
    Ok(LossNodes {
        total,
        weighted,
        plain,
        regularizer,
    })
}

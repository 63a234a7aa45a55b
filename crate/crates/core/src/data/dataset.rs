//! Channel normalization and training-sample assembly from a container.

use crate::data::container::{ContainerHeader, FieldContainer};
use crate::data::norm::NormStats;
use crate::error::{Error, Result};
use crate::layout::{Channel, ChannelLayout};

/// Maps between physical and normalized channel stacks.
///
/// Inputs and diagnostics use z-scores. Tendencies are divided by the
/// tendency standard deviation with no mean shift; channels whose tendency
/// never varies are held fixed when denormalizing.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub in_mean: Vec<f64>,
    pub in_scale: Vec<f64>,
    pub tend_scale: Vec<f64>,
    pub tend_active: Vec<bool>,
    pub diag_mean: Vec<f64>,
    pub diag_scale: Vec<f64>,
    pub diag_active: Vec<bool>,
}

impl Normalizer {
    pub fn new(layout: &ChannelLayout, stats: &NormStats) -> Result<Self> {
        let mut n = Self {
            in_mean: Vec::new(),
            in_scale: Vec::new(),
            tend_scale: Vec::new(),
            tend_active: Vec::new(),
            diag_mean: Vec::new(),
            diag_scale: Vec::new(),
            diag_active: Vec::new(),
        };
        for c in &layout.inputs {
            let s = stats.get(&c.name())?;
            n.in_mean.push(s.mean);
            n.in_scale.push(s.scale());
        }
        let np = layout.n_prognostic();
        for c in &layout.outputs[..np] {
            let s = stats.get(&c.name())?;
            n.tend_scale.push(s.tend_scale());
            n.tend_active.push(!s.tend_degenerate);
        }
        for c in &layout.outputs[np..] {
            let s = stats.get(&c.name())?;
            n.diag_mean.push(s.mean);
            n.diag_scale.push(s.scale());
            n.diag_active.push(!s.degenerate);
        }
        Ok(n)
    }

    /// Output channels that carry no information and are excluded from the loss.
    pub fn excluded_outputs(&self) -> Vec<bool> {
        self.tend_active.iter().chain(&self.diag_active).map(|a| !a).collect()
    }

    pub fn normalize_inputs(&self, raw: &mut [f64]) {
        let np = raw.len() / self.in_mean.len();
        for (c, chunk) in raw.chunks_mut(np).enumerate() {
            let (m, s) = (self.in_mean[c], self.in_scale[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
    }

    /// Normalized tendency of the prognostic block between two states.
    pub fn tendency_target(&self, prev: &[f64], next: &[f64]) -> Vec<f64> {
        let np = prev.len() / self.tend_scale.len();
        let mut out = Vec::with_capacity(prev.len());
        for c in 0..self.tend_scale.len() {
            let s = self.tend_scale[c];
            out.extend((c * np..(c + 1) * np).map(|i| (next[i] - prev[i]) / s));
        }
        out
    }

    /// Physical per-step tendencies from normalized model output.
    pub fn denormalize_tendencies(&self, norm: &[f64]) -> Vec<f64> {
        let np = norm.len() / self.tend_scale.len();
        let mut out = Vec::with_capacity(norm.len());
        for c in 0..self.tend_scale.len() {
            let s = if self.tend_active[c] { self.tend_scale[c] } else { 0.0 };
            out.extend(norm[c * np..(c + 1) * np].iter().map(|v| v * s));
        }
        out
    }

    pub fn normalize_diagnostics(&self, raw: &mut [f64]) {
        if self.diag_mean.is_empty() {
            return;
        }
        let np = raw.len() / self.diag_mean.len();
        for (c, chunk) in raw.chunks_mut(np).enumerate() {
            let (m, s) = (self.diag_mean[c], self.diag_scale[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
    }

    pub fn denormalize_diagnostics(&self, norm: &[f64]) -> Vec<f64> {
        if self.diag_mean.is_empty() {
            return Vec::new();
        }
        let np = norm.len() / self.diag_mean.len();
        let mut out = Vec::with_capacity(norm.len());
        for c in 0..self.diag_mean.len() {
            let (m, s) = (self.diag_mean[c], self.diag_scale[c]);
            out.extend(norm[c * np..(c + 1) * np].iter().map(|v| v * s + m));
        }
        out
    }
}

/// Field index (within one container time step) of every channel.
pub fn channel_fields(header: &ContainerHeader, channels: &[Channel]) -> Result<Vec<usize>> {
    channels
        .iter()
        .map(|c| {
            let (off, levels) = header.field_offset(&c.var)?;
            let k = c.level.unwrap_or(0);
            if k >= levels || (c.level.is_none() && levels != 1) {
                return Err(Error::Missing(format!("channel {} in container", c.name())));
            }
            Ok(off + k)
        })
        .collect()
}

/// One normalized training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time_index: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Training view over a container: inputs at `t`, tendency `t -> t+1` and
/// diagnostics at `t`.
pub struct Dataset<'a> {
    pub data: &'a FieldContainer,
    pub layout: ChannelLayout,
    pub normalizer: Normalizer,
    in_fields: Vec<usize>,
    out_fields: Vec<usize>,
}

impl<'a> Dataset<'a> {
    pub fn new(data: &'a FieldContainer, layout: ChannelLayout, stats: &NormStats) -> Result<Self> {
        let normalizer = Normalizer::new(&layout, stats)?;
        let in_fields = channel_fields(&data.header, &layout.inputs)?;
        let out_fields = channel_fields(&data.header, &layout.outputs)?;
        Ok(Self {
            data,
            layout,
            normalizer,
            in_fields,
            out_fields,
        })
    }

    pub fn npoints(&self) -> usize {
        self.data.header.npoints()
    }

    /// Number of usable samples (every step with a successor).
    pub fn len(&self) -> usize {
        self.data.time_count().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gathers physical channel values at time `t` for the given field indices.
    pub fn gather(&self, t: usize, fields: &[usize]) -> Vec<f64> {
        let np = self.npoints();
        let step = self.data.step(t);
        let mut out = Vec::with_capacity(fields.len() * np);
        for &f in fields {
            out.extend_from_slice(&step[f * np..(f + 1) * np]);
        }
        out
    }

    pub fn input_fields(&self) -> &[usize] {
        &self.in_fields
    }

    pub fn output_fields(&self) -> &[usize] {
        &self.out_fields
    }

    pub fn sample(&self, t: usize) -> Result<Sample> {
        if t + 1 >= self.data.time_count() {
            return Err(Error::OutOfRange(format!("sample {t} needs a successor step")));
        }
        let mut input = self.gather(t, &self.in_fields);
        self.normalizer.normalize_inputs(&mut input);
        let npr = self.layout.n_prognostic();
        let prev = self.gather(t, &self.out_fields[..npr]);
        let next = self.gather(t + 1, &self.out_fields[..npr]);
        let mut target = self.normalizer.tendency_target(&prev, &next);
        let mut diag = self.gather(t, &self.out_fields[npr..]);
        self.normalizer.normalize_diagnostics(&mut diag);
        target.extend(diag);
        Ok(Sample {
            time_index: t,
            input,
            target,
        })
    }

    /// Chronological split of `0, stride, 2*stride, ...` into (train, validation).
    pub fn split(&self, stride: usize, val_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let times: Vec<usize> = (0..self.len()).step_by(stride.max(1)).collect();
        let n_val = ((times.len() as f64) * val_fraction).round() as usize;
        let n_val = n_val.min(times.len().saturating_sub(1));
        let cut = times.len() - n_val;
        (times[..cut].to_vec(), times[cut..].to_vec())
    }
}

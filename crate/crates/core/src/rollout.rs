//! Autoregressive inference: forcing assembly, Euler integration of predicted
//! tendencies and trajectory output.

use std::sync::Arc;

use crate::checkpoint::Checkpoint;
use crate::data::container::{ContainerHeader, ContainerWriter, FieldContainer};
use crate::data::dataset::{channel_fields, Normalizer};
use crate::error::{Error, Result};
use crate::forcing::{self, interpolate_co2, stationary_co2, MonthlySeries, MONTH_SECONDS, STEP_SECONDS};
use crate::grid::GridSpec;
use crate::layout::{self, ChannelLayout, VarSpec};
use crate::model::forward_raw;
use crate::sht::Sht;
use crate::tensor::Tensor;

/// Default Gaussian width for coastal SST smoothing, in grid lengths.
pub const DEFAULT_KERNEL_SIGMA: f64 = 1.5;
/// The smoothing footprint extends this many standard deviations.
pub const KERNEL_TRUNCATION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Co2Mode {
    Observed,
    /// Repeat the twelve monthly values of this year.
    Stationary(i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SstMode {
    None,
    Observed,
    /// Observed SST plus a uniform offset (K) over the ocean.
    Biased(f64),
    /// As `Biased`, followed by coastal smoothing.
    BiasedSmoothed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Dataset state at this time index.
    State(usize),
    /// Time mean of the dataset prognostic fields.
    Climatology,
    /// All prognostic fields zero.
    Zero,
}

impl std::str::FromStr for Co2Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "observed" => Ok(Self::Observed),
            Some(("stationary", y)) => y
                .parse()
                .map(Self::Stationary)
                .map_err(|_| Error::Config(format!("bad stationary year {y:?}"))),
            _ => Err(Error::Config(format!("co2 mode {s:?}: expected observed or stationary:YEAR"))),
        }
    }
}

impl std::str::FromStr for SstMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = |v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("bad SST offset {v:?}")));
        match s.split_once(':') {
            None if s == "none" => Ok(Self::None),
            None if s == "observed" => Ok(Self::Observed),
            Some(("biased", v)) => Ok(Self::Biased(k(v)?)),
            Some(("smoothed", v)) => Ok(Self::BiasedSmoothed(k(v)?)),
            _ => Err(Error::Config(format!("sst mode {s:?}: expected none, observed, biased:K or smoothed:K"))),
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "state" => Ok(Self::State(0)),
            None if s == "climatology" => Ok(Self::Climatology),
            None if s == "zero" => Ok(Self::Zero),
            Some(("state", t)) => t.parse().map(Self::State).map_err(|_| Error::Config(format!("bad init index {t:?}"))),
            _ => Err(Error::Config(format!("init mode {s:?}: expected state[:T], climatology or zero"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    /// Number of model steps.
    pub horizon: usize,
    /// Integration step in units of the 6-hour data interval.
    pub dt: f64,
    pub co2_mode: Co2Mode,
    pub sst_mode: SstMode,
    pub init_mode: InitMode,
    /// Keep every `stride`-th state in the trajectory.
    pub stride: usize,
    pub kernel_sigma: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: 0,
            dt: 1.0,
            co2_mode: Co2Mode::Observed,
            sst_mode: SstMode::None,
            init_mode: InitMode::State(0),
            stride: 1,
            kernel_sigma: DEFAULT_KERNEL_SIGMA,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt != 1.0 {
            return Err(Error::Config(format!("dt must be one 6-hour step, got {}", self.dt)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.kernel_sigma > 0.0) {
            return Err(Error::Config("kernel sigma must be positive".into()));
        }
        if let SstMode::Biased(k) | SstMode::BiasedSmoothed(k) = self.sst_mode {
            if !k.is_finite() {
                return Err(Error::Config("SST offset must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Prescribed SST fields on a regular time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SstSeries {
    pub time_start: i64,
    pub time_step: i64,
    pub fields: Vec<Vec<f64>>,
}

impl SstSeries {
    pub fn at(&self, t: i64) -> Result<&[f64]> {
        let rel = t - self.time_start;
        if rel < 0 || rel % self.time_step != 0 {
            return Err(Error::OutOfRange(format!("SST at time {t}")));
        }
        self.fields
            .get((rel / self.time_step) as usize)
            .map(|f| f.as_slice())
            .ok_or_else(|| Error::OutOfRange(format!("SST at time {t} (series exhausted)")))
    }
}

/// External drivers of a rollout. Insolation is generated analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries {
    pub co2: MonthlySeries,
    pub solar_constant: f64,
    pub land_sea_mask: Vec<f64>,
    pub orography: Vec<f64>,
    pub sst: Option<SstSeries>,
}

impl ForcingSeries {
    /// Static fields and SST from a dataset; CO2 anchors are read at month
    /// midpoints and extended one month on each side by linear extrapolation.
    pub fn from_container(data: &FieldContainer, solar_constant: f64) -> Result<Self> {
        if data.time_count() == 0 {
            return Err(Error::Invalid("empty dataset".into()));
        }
        let h = &data.header;
        let land_sea_mask = data.field(0, layout::LAND_SEA_MASK, 0)?.to_vec();
        let orography = data.field(0, layout::OROGRAPHY, 0)?.to_vec();
        let co2 = monthly_co2_from_container(data)?;
        let sst = if h.var_index(layout::SST).is_ok() {
            let fields = (0..data.time_count()).map(|t| data.field(t, layout::SST, 0).map(|f| f.to_vec())).collect::<Result<_>>()?;
            Some(SstSeries {
                time_start: h.time_start,
                time_step: h.time_step,
                fields,
            })
        } else {
            None
        };
        Ok(Self {
            co2,
            solar_constant,
            land_sea_mask,
            orography,
            sst,
        })
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let np = grid.npoints();
        for (what, f) in [("land-sea mask", &self.land_sea_mask), ("orography", &self.orography)] {
            if f.len() != np {
                return Err(Error::Shape {
                    expected: vec![grid.nlat, grid.nlon],
                    got: vec![f.len()],
                });
            }
            crate::error::ensure_finite(f, what)?;
        }
        if self.land_sea_mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Invalid("land-sea mask outside [0, 1]".into()));
        }
        if let Some(s) = &self.sst {
            if s.time_step <= 0 || s.fields.iter().any(|f| f.len() != np) {
                return Err(Error::Invalid("SST series shape".into()));
            }
        }
        Ok(())
    }

    pub fn co2_at(&self, mode: Co2Mode, t: i64) -> Result<f64> {
        match mode {
            Co2Mode::Observed => interpolate_co2(&self.co2, t),
            Co2Mode::Stationary(year) => stationary_co2(&self.co2, year, t),
        }
    }

    pub fn sst_at(&self, mode: SstMode, t: i64, kernel_sigma: f64, grid: &GridSpec) -> Result<Option<Vec<f64>>> {
        let observed = || -> Result<Vec<f64>> {
            let s = self.sst.as_ref().ok_or_else(|| Error::Missing("SST forcing".into()))?;
            Ok(s.at(t)?.to_vec())
        };
        Ok(match mode {
            SstMode::None => None,
            SstMode::Observed => Some(observed()?),
            SstMode::Biased(dk) => Some(bias_sst(&observed()?, &self.land_sea_mask, dk)),
            SstMode::BiasedSmoothed(dk) => {
                let biased = bias_sst(&observed()?, &self.land_sea_mask, dk);
                Some(smooth_sst(&biased, &self.land_sea_mask, grid.nlat, grid.nlon, kernel_sigma)?.field)
            }
        })
    }
}

/// CO2 anchors sampled from the dataset's CO2 field at month midpoints.
pub fn monthly_co2_from_container(data: &FieldContainer) -> Result<MonthlySeries> {
    let h = &data.header;
    let n = data.time_count() as i64;
    let t_end = h.time(data.time_count() - 1);
    let first = h.time_start.div_euclid(MONTH_SECONDS);
    let last = t_end.div_euclid(MONTH_SECONDS);
    let mut months = Vec::new();
    let mut values = Vec::new();
    for m in first..=last {
        let t = MonthlySeries::anchor_time(m);
        let rel = t - h.time_start;
        if rel < 0 || rel % h.time_step != 0 || rel / h.time_step >= n {
            continue;
        }
        months.push(m);
        values.push(data.field((rel / h.time_step) as usize, layout::CO2, 0)?[0]);
    }
    if months.len() < 2 || months.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Invalid("dataset needs CO2 at two or more consecutive month midpoints".into()));
    }
    let k = values.len();
    let before = 2.0 * values[0] - values[1];
    let after = 2.0 * values[k - 1] - values[k - 2];
    let mut all = vec![before];
    all.extend(values);
    all.push(after);
    MonthlySeries::new(months[0] - 1, all)
}

fn bias_sst(sst: &[f64], land_sea_mask: &[f64], dk: f64) -> Vec<f64> {
    sst.iter()
        .zip(land_sea_mask)
        .map(|(s, m)| if *m < 0.5 { s + dk } else { *s })
        .collect()
}

/// Result of [`smooth_sst`]; `noop` is set when the mask has no ocean.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSst {
    pub field: Vec<f64>,
    pub noop: bool,
}

/// Truncated Gaussian weights for offsets `-r..=r`, unnormalized.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (KERNEL_TRUNCATION * sigma).floor() as i64;
    (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect()
}

/// Separable convolution, periodic in longitude and edge-clamped in latitude.
fn convolve(field: &[f64], nlat: usize, nlon: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut along = vec![0.0; field.len()];
    for i in 0..nlat {
        for j in 0..nlon {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let jj = (j as i64 + k as i64 - r).rem_euclid(nlon as i64) as usize;
                acc += w * field[i * nlon + jj];
            }
            along[i * nlon + j] = acc;
        }
    }
    let mut out = vec![0.0; field.len()];
    for i in 0..nlat {
        for (k, w) in kernel.iter().enumerate() {
            let ii = (i as i64 + k as i64 - r).clamp(0, nlat as i64 - 1) as usize;
            for j in 0..nlon {
                out[i * nlon + j] += w * along[ii * nlon + j];
            }
        }
    }
    out
}

/// Coastal SST smoothing.
///
/// With ocean fraction `o = 1 - mask`, the ocean SST is spread by
/// `c = G*(sst o) / max(G*o, eps)`. Ocean points keep their value, land
/// points with ocean inside the kernel footprint take `c` (weighted by their
/// land fraction), and interior land with no ocean in reach is untouched.
pub fn smooth_sst(sst: &[f64], land_sea_mask: &[f64], nlat: usize, nlon: usize, kernel_sigma: f64) -> Result<SmoothedSst> {
    let np = nlat * nlon;
    if sst.len() != np || land_sea_mask.len() != np {
        return Err(Error::Shape {
            expected: vec![nlat, nlon],
            got: vec![sst.len(), land_sea_mask.len()],
        });
    }
    if !(kernel_sigma > 0.0) {
        return Err(Error::Invalid("kernel sigma must be positive".into()));
    }
    if land_sea_mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::Invalid("land-sea mask outside [0, 1]".into()));
    }
    let ocean: Vec<f64> = land_sea_mask.iter().map(|m| 1.0 - m).collect();
    if ocean.iter().all(|o| *o == 0.0) {
        return Ok(SmoothedSst {
            field: sst.to_vec(),
            noop: true,
        });
    }
    let kernel = gaussian_kernel(kernel_sigma);
    let total = kernel.iter().sum::<f64>().powi(2);
    let eps = 1e-12 * total;
    let weighted: Vec<f64> = sst.iter().zip(&ocean).map(|(s, o)| s * o).collect();
    let num = convolve(&weighted, nlat, nlon, &kernel);
    let den = convolve(&ocean, nlat, nlon, &kernel);
    let field = (0..np)
        .map(|p| {
            let o = ocean[p];
            if den[p] <= eps || o == 1.0 {
                return sst[p];
            }
            let c = num[p] / den[p].max(eps);
            o * sst[p] + (1.0 - o) * c
        })
        .collect();
    Ok(SmoothedSst { field, noop: false })
}

/// `state + dt * tendency` for every prognostic value.
pub fn euler_step(state: &[f64], tendencies: &[f64], dt: f64) -> Result<Vec<f64>> {
    if state.len() != tendencies.len() {
        return Err(Error::Shape {
            expected: vec![state.len()],
            got: vec![tendencies.len()],
        });
    }
    let next: Vec<f64> = state.iter().zip(tendencies).map(|(x, d)| x + dt * d).collect();
    crate::error::ensure_finite(&next, "state after Euler step")?;
    Ok(next)
}

/// Prognostic state at a model time.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub time: i64,
    pub prognostic: Vec<f64>,
}

/// Resolves an [`InitMode`] against a dataset. `time` overrides the start
/// time for climatology and zero starts (default: the dataset start).
pub fn initial_state(mode: InitMode, data: &FieldContainer, layout: &ChannelLayout, time: Option<i64>) -> Result<InitialState> {
    let np = data.header.npoints();
    let prog = &layout.outputs[..layout.n_prognostic()];
    let fields = channel_fields(&data.header, prog)?;
    let gather = |t: usize| -> Vec<f64> {
        let step = data.step(t);
        fields.iter().flat_map(|&f| step[f * np..(f + 1) * np].iter().copied()).collect()
    };
    let start = time.unwrap_or(data.header.time_start);
    match mode {
        InitMode::State(t) => {
            if t >= data.time_count() {
                return Err(Error::OutOfRange(format!("initial state index {t}")));
            }
            Ok(InitialState {
                time: data.header.time(t),
                prognostic: gather(t),
            })
        }
        InitMode::Climatology => {
            let n = data.time_count();
            if n == 0 {
                return Err(Error::Invalid("empty dataset".into()));
            }
            let mut mean = vec![0.0; fields.len() * np];
            for t in 0..n {
                mean.iter_mut().zip(gather(t)).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            Ok(InitialState { time: start, prognostic: mean })
        }
        InitMode::Zero => Ok(InitialState {
            time: start,
            prognostic: vec![0.0; fields.len() * np],
        }),
    }
}

/// Receives trajectory steps in order.
pub trait TrajectorySink {
    fn record(&mut self, fields: &[f64]) -> Result<()>;
}

impl TrajectorySink for FieldContainer {
    fn record(&mut self, fields: &[f64]) -> Result<()> {
        self.push_step(fields)
    }
}

impl TrajectorySink for ContainerWriter {
    fn record(&mut self, fields: &[f64]) -> Result<()> {
        self.write_step(fields)
    }
}

impl<F: FnMut(&[f64]) -> Result<()>> TrajectorySink for F {
    fn record(&mut self, fields: &[f64]) -> Result<()> {
        self(fields)
    }
}

/// Container variables of a trajectory: prognostics, diagnostics, forcings.
pub fn trajectory_vars(layout: &ChannelLayout) -> Vec<VarSpec> {
    layout.all_vars().cloned().collect()
}

pub fn trajectory_header(ckpt: &Checkpoint, start: i64, stride: usize) -> Result<ContainerHeader> {
    let mut h = ContainerHeader::new(&ckpt.grid, start, STEP_SECONDS * stride as i64, trajectory_vars(&ckpt.layout))?;
    h.time_count = 0;
    Ok(h)
}

/// A checkpoint ready for inference.
pub struct Emulator {
    pub checkpoint: Checkpoint,
    pub normalizer: Normalizer,
    plan: Arc<Sht>,
}

/// Physical model output for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Per-step tendencies of the prognostic channels.
    pub tendencies: Vec<f64>,
    /// Diagnostic channels (precipitation clamped at zero).
    pub diagnostics: Vec<f64>,
}

impl Emulator {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        let normalizer = Normalizer::new(&checkpoint.layout, &checkpoint.stats)?;
        let plan = Arc::new(Sht::new(&checkpoint.grid));
        Ok(Self {
            checkpoint,
            normalizer,
            plan,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.checkpoint.grid
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.checkpoint.layout
    }

    /// Forcing channels at time `t`, in layout order.
    pub fn forcing_fields(&self, forcings: &ForcingSeries, config: &RolloutConfig, t: i64) -> Result<Vec<f64>> {
        let g = self.grid();
        let np = g.npoints();
        let mut out = Vec::with_capacity(self.layout().n_forcing() * np);
        for v in &self.layout().forcing {
            match v.name.as_str() {
                layout::OROGRAPHY => out.extend_from_slice(&forcings.orography),
                layout::LAND_SEA_MASK => out.extend_from_slice(&forcings.land_sea_mask),
                layout::INSOLATION => out.extend(forcing::tisr_field(g, t, forcings.solar_constant)),
                layout::CO2 => {
                    let c = forcings.co2_at(config.co2_mode, t)?;
                    out.extend(std::iter::repeat(c).take(np));
                }
                layout::SST => {
                    let sst = forcings.sst_at(config.sst_mode, t, config.kernel_sigma, g)?;
                    out.extend(sst.ok_or_else(|| Error::Missing("SST mode for an SST-trained checkpoint".into()))?);
                }
                other => return Err(Error::Missing(format!("forcing {other}"))),
            }
        }
        Ok(out)
    }

    /// Runs the network on a physical prognostic state plus forcing fields.
    pub fn predict(&self, state: &[f64], forcing_fields: &[f64]) -> Result<StepOutput> {
        let g = self.grid();
        let np = g.npoints();
        let layout = self.layout();
        let mut input = Vec::with_capacity(layout.n_in() * np);
        input.extend_from_slice(state);
        input.extend_from_slice(forcing_fields);
        if input.len() != layout.n_in() * np {
            return Err(Error::Shape {
                expected: vec![layout.n_in(), g.nlat, g.nlon],
                got: vec![input.len()],
            });
        }
        self.normalizer.normalize_inputs(&mut input);
        let x = Tensor::new(vec![layout.n_in(), g.nlat, g.nlon], input)?;
        let y = forward_raw(&x, &self.checkpoint.params, &self.plan)?;
        let npr = layout.n_prognostic() * np;
        let tendencies = self.normalizer.denormalize_tendencies(&y.data[..npr]);
        let mut diagnostics = self.normalizer.denormalize_diagnostics(&y.data[npr..]);
        diagnostics.iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(StepOutput { tendencies, diagnostics })
    }
}

/// Summary of a finished rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSummary {
    pub steps: usize,
    pub recorded: usize,
    pub end_time: i64,
}

/// Runs the autoregressive loop, passing every `stride`-th full step
/// (prognostics, diagnostics, forcings) to `sink`.
pub fn run_rollout(
    emulator: &Emulator,
    init: &InitialState,
    forcings: &ForcingSeries,
    config: &RolloutConfig,
    sink: &mut dyn TrajectorySink,
) -> Result<RolloutSummary> {
    config.validate()?;
    let g = emulator.grid();
    forcings.validate(g)?;
    let layout = emulator.layout();
    let np = g.npoints();
    let has_sst = layout.has_var(layout::SST);
    if has_sst != (config.sst_mode != SstMode::None) {
        return Err(Error::Config(format!(
            "checkpoint {} SST but rollout SST mode is {:?}",
            if has_sst { "expects" } else { "has no" },
            config.sst_mode
        )));
    }
    if init.prognostic.len() != layout.n_prognostic() * np {
        return Err(Error::Shape {
            expected: vec![layout.n_prognostic(), g.nlat, g.nlon],
            got: vec![init.prognostic.len()],
        });
    }
    let abort = |step: usize, e: Error| Error::RolloutAborted {
        step,
        reason: e.to_string(),
    };
    let mut state = init.prognostic.clone();
    let mut t = init.time;
    let mut recorded = 0;
    let mut record = Vec::with_capacity((layout.n_prognostic() + layout.n_diagnostic() + layout.n_forcing()) * np);
    for n in 0..=config.horizon {
        let forc = emulator.forcing_fields(forcings, config, t).map_err(|e| abort(n, e))?;
        let out = emulator.predict(&state, &forc).map_err(|e| abort(n, e))?;
        if n % config.stride == 0 {
            record.clear();
            record.extend_from_slice(&state);
            record.extend_from_slice(&out.diagnostics);
            record.extend_from_slice(&forc);
            sink.record(&record)?;
            recorded += 1;
        }
        if n == config.horizon {
            break;
        }
        state = euler_step(&state, &out.tendencies, config.dt).map_err(|e| abort(n + 1, e))?;
        t += STEP_SECONDS;
    }
    Ok(RolloutSummary {
        steps: config.horizon,
        recorded,
        end_time: t,
    })
}

/// Runs a rollout into an in-memory trajectory container.
pub fn rollout_to_container(emulator: &Emulator, init: &InitialState, forcings: &ForcingSeries, config: &RolloutConfig) -> Result<FieldContainer> {
    let mut c = FieldContainer::new(trajectory_header(&emulator.checkpoint, init.time, config.stride)?)?;
    run_rollout(emulator, init, forcings, config, &mut c)?;
    Ok(c)
}

/// Runs a rollout streaming to a container file; returns the step count written.
pub fn rollout_to_file(
    emulator: &Emulator,
    init: &InitialState,
    forcings: &ForcingSeries,
    config: &RolloutConfig,
    path: impl AsRef<std::path::Path>,
) -> Result<u64> {
    let mut w = ContainerWriter::create(path, trajectory_header(&emulator.checkpoint, init.time, config.stride)?)?;
    run_rollout(emulator, init, forcings, config, &mut w)?;
    w.finish()
}

//! Command-line front end. Flags override values from `--config` files.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::config::KeyValues;
use crate::data::{compute_norm_stats, read_container, write_synthetic_climate, Dataset, FieldContainer, NormStats};
use crate::diagnostics::report::{dispersion_table, eof_tables, pdf_table, ssw_tables, trend_table, wk_table, zonal_map_table};
use crate::diagnostics::{self, render, EofParams, Hemisphere, SswParams, WkParams, ZonalMap};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentOptions, ExperimentPreset};
use crate::forcing::{STEPS_PER_YEAR, SOLAR_CONSTANT};
use crate::grid::build_grid;
use crate::layout::{self, ChannelLayout};
use crate::rollout::{initial_state, rollout_to_file, Co2Mode, Emulator, ForcingSeries, InitMode, RolloutConfig, SstMode};
use crate::trainer::train;

#[derive(Debug, Parser)]
#[command(name = "lucie3d", version, about = "Spherical Fourier neural operator climate emulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic forced climate dataset.
    Synth(SynthArgs),
    /// Compute normalization statistics of a dataset.
    Stats(StatsArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Roll a checkpoint forward under prescribed forcings.
    Rollout(RolloutArgs),
    /// Compute one diagnostic of a trajectory.
    Diag(DiagArgs),
    /// Run a named experiment end to end.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key = value file (seed, years, co2_start, co2_end, forcing_sensitivity,
    /// noise_amplitude, persistence, with_sst, waves, truncation, nlat, nlon, ...).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output container.
    #[arg(long)]
    pub out: PathBuf,
    /// Random seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of 360-day years; overrides the config file.
    #[arg(long)]
    pub years: Option<usize>,
    /// Include a prescribed SST forcing channel.
    #[arg(long)]
    pub with_sst: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Input container.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output statistics file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training container.
    #[arg(long)]
    pub data: PathBuf,
    /// Normalization statistics; computed from the data when omitted.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// key = value file (total_epochs, finetune_epochs, batch_size, lr_max, lr_min,
    /// weight_decay, val_fraction, sample_stride, adaptive_weighting, regularizer_weight,
    /// regularizer_band, model, num_blocks, latent_dim).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss history (one line per epoch and channel).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Random seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total epochs; overrides the config file.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Container supplying the initial state, CO2, SST and static fields.
    #[arg(long)]
    pub data: PathBuf,
    /// state[:INDEX], climatology or zero.
    #[arg(long, default_value = "state")]
    pub init: InitMode,
    /// Number of 6-hour steps.
    #[arg(long)]
    pub horizon: usize,
    /// observed or stationary:YEAR.
    #[arg(long, default_value = "observed")]
    pub co2: Co2Mode,
    /// none, observed, biased:K or smoothed:K.
    #[arg(long, default_value = "none")]
    pub sst: SstMode,
    /// Output trajectory container.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep every n-th step.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Dataset step used as start time for climatology and zero starts.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagKind {
    Clim,
    Change,
    Trend,
    Wk,
    Eof,
    Ssw,
    Pdf,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    pub kind: DiagKind,
    /// Model trajectory container.
    #[arg(long)]
    pub model: PathBuf,
    /// Reference container (bias for clim, shared bins for pdf).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Output directory for report tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Variable to analyse; each diagnostic has its own default.
    #[arg(long)]
    pub var: Option<String>,
    /// Level index; each diagnostic has its own default.
    #[arg(long)]
    pub level: Option<usize>,
    /// Years averaged at each end of the change map.
    #[arg(long, default_value_t = 1)]
    pub span_years: usize,
    /// Histogram bins for pdf.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Hemisphere for eof: north or south.
    #[arg(long, default_value = "north")]
    pub hemisphere: String,
    /// Also write PPM heat maps where a table has a 2-D layout.
    #[arg(long)]
    pub render: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// forcing-response, stationary-forcing, biased-sst-{0,2,4},
    /// biased-sst-smoothed-{0,2,4}, spinup-climatology, spinup-zero or era-shift.
    pub preset: String,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Container supplying initial state and forcings.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Steps per rollout; defaults to the rest of the dataset.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Dataset step of the initial state.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Year whose CO2 cycle stationary runs repeat.
    #[arg(long)]
    pub stationary_year: Option<i64>,
    /// Late CO2 year for era-shift.
    #[arg(long)]
    pub late_year: Option<i64>,
}

fn load_config(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => KeyValues::load(p),
        None => Ok(KeyValues::default()),
    }
}

fn has_var(c: &FieldContainer, name: &str) -> bool {
    c.header.var_index(name).is_ok()
}

pub fn synth(a: &SynthArgs) -> Result<String> {
    let mut kv = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    if let Some(y) = a.years {
        kv.set("years", y);
    }
    if a.with_sst {
        kv.set("with_sst", true);
    }
    let cfg = kv.synth_config()?;
    let (trunc, nlat, nlon) = kv.grid_dims()?;
    kv.finish()?;
    let grid = build_grid(trunc, nlat, nlon)?;
    let h = write_synthetic_climate(&cfg, &grid, &a.out)?;
    Ok(format!("wrote {} steps on {}x{} to {}", h.time_count, nlat, nlon, a.out.display()))
}

pub fn stats(a: &StatsArgs) -> Result<String> {
    let s = crate::data::compute_norm_stats_file(&a.input)?;
    std::fs::write(&a.out, s.to_text())?;
    let flagged = s.flagged();
    Ok(if flagged.is_empty() {
        format!("wrote {}", a.out.display())
    } else {
        format!("wrote {}; degenerate: {}", a.out.display(), flagged.join(", "))
    })
}

pub fn train_cmd(a: &TrainArgs) -> Result<String> {
    let mut kv = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    if let Some(e) = a.epochs {
        kv.set("total_epochs", e);
    }
    let data = read_container(&a.data)?;
    let grid = data.header.grid()?;
    let stats: NormStats = match &a.stats {
        Some(p) => NormStats::from_text(&std::fs::read_to_string(p)?)?,
        None => compute_norm_stats(&data)?,
    };
    let layout = ChannelLayout::standard(grid.nlevels(), has_var(&data, layout::SST));
    let tc = kv.train_config()?;
    let mc = kv.model_config(layout.n_in(), layout.n_out(), grid.truncation)?;
    kv.finish()?;
    let ds = Dataset::new(&data, layout, &stats)?;
    let out = train(&ds, &stats, &tc, &mc, &grid)?;
    out.checkpoint.save(&a.out)?;
    if let Some(h) = &a.history {
        std::fs::write(h, out.history.to_text())?;
    }
    let last = out.history.records.last().map(|r| r.train.total()).unwrap_or(f64::NAN);
    Ok(format!("trained {} epochs, final loss {last:e}; wrote {}", tc.total_epochs, a.out.display()))
}

pub fn rollout_cmd(a: &RolloutArgs) -> Result<String> {
    let em = Emulator::new(Checkpoint::load(&a.checkpoint)?)?;
    let data = read_container(&a.data)?;
    let forcings = ForcingSeries::from_container(&data, SOLAR_CONSTANT)?;
    let start = data.header.time(a.start.min(data.time_count().saturating_sub(1)));
    let init = initial_state(a.init, &data, em.layout(), Some(start))?;
    let config = RolloutConfig {
        horizon: a.horizon,
        co2_mode: a.co2,
        sst_mode: a.sst,
        init_mode: a.init,
        stride: a.stride,
        ..Default::default()
    };
    let s = rollout_to_file(&em, &init, &forcings, &config, &a.out)?;
    Ok(format!("horizon {}, {s} steps recorded; wrote {}", a.horizon, a.out.display()))
}

fn hemisphere(s: &str) -> Result<Hemisphere> {
    match s {
        "north" => Ok(Hemisphere::North),
        "south" => Ok(Hemisphere::South),
        _ => Err(Error::Config(format!("hemisphere {s:?}: expected north or south"))),
    }
}

pub fn diag(a: &DiagArgs) -> Result<String> {
    let model = read_container(&a.model)?;
    let reference = a.reference.as_ref().map(read_container).transpose()?;
    let grid = model.header.grid()?;
    let lats = grid.latitudes_deg();
    let lons: Vec<f64> = grid.longitudes().iter().map(|l| l.to_degrees()).collect();
    std::fs::create_dir_all(&a.out)?;
    let mut written = Vec::new();
    let mut save = |name: &str, t: &diagnostics::ReportTable, heat: Option<(&str, &str, &str)>| -> Result<()> {
        t.save(a.out.join(format!("{name}.txt")))?;
        written.push(format!("{name}.txt"));
        if let (true, Some((x, y, v))) = (a.render, heat) {
            render::render_table(t, x, y, v, a.out.join(format!("{name}.ppm")))?;
            written.push(format!("{name}.ppm"));
        }
        Ok(())
    };
    let var = |default: &str| a.var.clone().unwrap_or_else(|| default.to_string());
    let surface = grid.nlevels() - 1;
    match a.kind {
        DiagKind::Clim => {
            let v = var(layout::TEMPERATURE);
            let map = match &reference {
                Some(r) => diagnostics::climatology_bias(&model, &diagnostics::align_reference(&model, r)?, &v)?,
                None => ZonalMap {
                    var: v.clone(),
                    levels: diagnostics::levels_of(&model, &v)?,
                    nlat: grid.nlat,
                    values: diagnostics::zonal_time_mean(&model, &v, 0..model.time_count())?,
                    reference: None,
                },
            };
            let kind = if reference.is_some() { "bias" } else { "climatology" };
            save(&format!("{kind}_{v}"), &zonal_map_table(kind, &map, &grid.sigma_levels, &lats), Some(("lat", "sigma", "value")))?;
        }
        DiagKind::Change => {
            let v = var(layout::TEMPERATURE);
            let n = model.time_count();
            let span = (a.span_years * STEPS_PER_YEAR * crate::forcing::STEP_SECONDS as usize / model.header.time_step as usize).clamp(1, n);
            let map = diagnostics::climate_change_map(&model, &v, 0..span, n - span..n)?;
            save(&format!("change_{v}"), &zonal_map_table("climate-change", &map, &grid.sigma_levels, &lats), Some(("lat", "sigma", "value")))?;
        }
        DiagKind::Trend => {
            let v = var(layout::TEMPERATURE);
            let levels: Vec<usize> = match a.level {
                Some(l) => vec![l],
                None => (0..diagnostics::levels_of(&model, &v)?).collect(),
            };
            let fits = levels
                .iter()
                .map(|&l| {
                    let mut f = diagnostics::annual_trend(&model, &v, l, &grid)?;
                    f.label = format!("{v}@{l}");
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            save(&format!("trend_{v}"), &trend_table(&fits), None)?;
        }
        DiagKind::Wk => {
            let v = var(layout::ZONAL_WIND);
            let level = a.level.unwrap_or(surface);
            let s = diagnostics::wheeler_kiladis(&model, &v, level, &WkParams::default())?;
            save(&format!("wk_{v}"), &wk_table(&s), Some(("k", "freq_cpd", "symmetric")))?;
            save("kelvin_dispersion", &dispersion_table(WkParams::default().max_wavenumber), None)?;
        }
        DiagKind::Eof => {
            let v = var(layout::LOG_SURFACE_PRESSURE);
            let e = diagnostics::leading_eof(&model, &v, a.level.unwrap_or(0), &EofParams::djf(hemisphere(&a.hemisphere)?))?;
            let (p, pc) = eof_tables(&e, &lats, &lons);
            save(&format!("eof_pattern_{}", a.hemisphere), &p, Some(("lon", "lat", "loading")))?;
            save(&format!("eof_pc_{}", a.hemisphere), &pc, None)?;
        }
        DiagKind::Ssw => {
            let r = diagnostics::ssw_diagnostics(&model, &SswParams::default())?;
            let (d, e) = ssw_tables(&r);
            save("ssw_daily", &d, None)?;
            save("ssw_events", &e, None)?;
        }
        DiagKind::Pdf => {
            let v = var(layout::PRECIPITATION);
            let level = a.level.unwrap_or(0);
            let mv: Vec<f64> = diagnostics::field_series(&model, &v, level)?.concat();
            let rv: Option<Vec<f64>> = reference.as_ref().map(|r| diagnostics::field_series(r, &v, level).map(|s| s.concat())).transpose()?;
            let sets: Vec<&[f64]> = std::iter::once(mv.as_slice()).chain(rv.as_deref()).collect();
            let edges = diagnostics::shared_edges(&sets, a.bins)?;
            let pm = diagnostics::log_pdf(&model, &v, level, &edges)?;
            let pr = reference.as_ref().map(|r| diagnostics::log_pdf(r, &v, level, &edges)).transpose()?;
            let mut pdfs = vec![("model", &pm)];
            if let Some(p) = &pr {
                pdfs.push(("reference", p));
            }
            save(&format!("pdf_{v}"), &pdf_table("log-pdf", &pdfs), None)?;
        }
    }
    Ok(format!("wrote {} to {}", written.join(", "), a.out.display()))
}

pub fn experiment_cmd(a: &ExperimentArgs) -> Result<String> {
    let preset: ExperimentPreset = a.preset.parse()?;
    let em = Emulator::new(Checkpoint::load(&a.checkpoint)?)?;
    let data = read_container(&a.data)?;
    let opts = ExperimentOptions {
        horizon: a.horizon,
        start_index: a.start,
        stride: a.stride,
        stationary_year: a.stationary_year,
        late_year: a.late_year,
    };
    let report = run_experiment(preset, &em, &data, &opts, &a.out)?;
    let mut s = format!("{}: {} files in {}", report.preset, report.manifest.len(), a.out.display());
    for (name, surf, top) in &report.trends {
        s.push_str(&format!("\n  {name}: surface {surf:+.4} K/decade, top {top:+.4} K/decade"));
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train_cmd(a),
        Command::Rollout(a) => rollout_cmd(a),
        Command::Diag(a) => diag(a),
        Command::Experiment(a) => experiment_cmd(a),
    }
}

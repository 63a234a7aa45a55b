//! Named end-to-end experiments: one or more rollouts plus the diagnostics
//! that go with them, written to a directory with a checksum manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::data::container::{write_container, FieldContainer};
use crate::diagnostics::report::{trend_table, zonal_map_table, ReportTable};
use crate::diagnostics::{climate_change_map, trend};
use crate::error::{Error, Result};
use crate::forcing::{year_of, STEPS_PER_YEAR};
use crate::layout;
use crate::rollout::{initial_state, rollout_to_container, Co2Mode, Emulator, ForcingSeries, InitMode, RolloutConfig, SstMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExperimentPreset {
    /// Observed versus stationary CO2 from the same initial state.
    ForcingResponse,
    /// Stationary CO2 only.
    StationaryForcing,
    /// Prescribed SST shifted by a fixed offset over the ocean, optionally smoothed at coasts.
    BiasedSst { offset: u32, smoothed: bool },
    SpinupClimatology,
    SpinupZero,
    /// Same initial state, CO2 held at an early and at a late year.
    EraShift,
}

pub const PRESET_NAMES: [&str; 12] = [
    "forcing-response",
    "stationary-forcing",
    "biased-sst-0",
    "biased-sst-2",
    "biased-sst-4",
    "biased-sst-smoothed-0",
    "biased-sst-smoothed-2",
    "biased-sst-smoothed-4",
    "spinup-climatology",
    "spinup-zero",
    "era-shift",
    "",
];

impl FromStr for ExperimentPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let biased = |rest: &str, smoothed: bool| -> Option<Self> {
            match rest {
                "0" | "2" | "4" => Some(Self::BiasedSst {
                    offset: rest.parse().ok()?,
                    smoothed,
                }),
                _ => None,
            }
        };
        let p = match s {
            "forcing-response" => Some(Self::ForcingResponse),
            "stationary-forcing" => Some(Self::StationaryForcing),
            "spinup-climatology" => Some(Self::SpinupClimatology),
            "spinup-zero" => Some(Self::SpinupZero),
            "era-shift" => Some(Self::EraShift),
            _ => s
                .strip_prefix("biased-sst-smoothed-")
                .and_then(|r| biased(r, true))
                .or_else(|| s.strip_prefix("biased-sst-").and_then(|r| biased(r, false))),
        };
        p.ok_or_else(|| {
            let names: Vec<&str> = PRESET_NAMES.iter().copied().filter(|n| !n.is_empty()).collect();
            Error::Config(format!("unknown preset {s:?}; expected one of: {}", names.join(", ")))
        })
    }
}

impl ExperimentPreset {
    pub fn name(&self) -> String {
        match self {
            Self::ForcingResponse => "forcing-response".into(),
            Self::StationaryForcing => "stationary-forcing".into(),
            Self::BiasedSst { offset, smoothed: false } => format!("biased-sst-{offset}"),
            Self::BiasedSst { offset, smoothed: true } => format!("biased-sst-smoothed-{offset}"),
            Self::SpinupClimatology => "spinup-climatology".into(),
            Self::SpinupZero => "spinup-zero".into(),
            Self::EraShift => "era-shift".into(),
        }
    }

    pub fn needs_sst(&self) -> bool {
        matches!(self, Self::BiasedSst { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Rollout length in steps; defaults to the rest of the dataset after the start.
    pub horizon: Option<usize>,
    /// Dataset time index of the initial state (and start time for spin-ups).
    pub start_index: usize,
    pub stride: usize,
    /// Calendar year whose CO2 a stationary run repeats; defaults to the start year.
    pub stationary_year: Option<i64>,
    /// Late CO2 year for the era-shift experiment; defaults to the last full dataset year.
    pub late_year: Option<i64>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            horizon: None,
            start_index: 0,
            stride: 1,
            stationary_year: None,
            late_year: None,
        }
    }
}

/// One rollout of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSpec {
    pub name: String,
    pub config: RolloutConfig,
}

/// Rollouts a preset runs against a dataset.
pub fn plan(preset: ExperimentPreset, data: &FieldContainer, opts: &ExperimentOptions) -> Result<Vec<RolloutSpec>> {
    let n = data.time_count();
    if opts.start_index >= n {
        return Err(Error::OutOfRange(format!("start index {} of {n} steps", opts.start_index)));
    }
    let horizon = opts.horizon.unwrap_or(n - 1 - opts.start_index);
    let start_year = year_of(data.header.time(opts.start_index));
    let stationary = opts.stationary_year.unwrap_or(start_year);
    let base = RolloutConfig {
        horizon,
        stride: opts.stride,
        init_mode: InitMode::State(opts.start_index),
        ..Default::default()
    };
    let spec = |name: &str, config: RolloutConfig| RolloutSpec {
        name: name.to_string(),
        config,
    };
    Ok(match preset {
        ExperimentPreset::ForcingResponse => vec![
            spec("observed", base.clone()),
            spec(
                "stationary",
                RolloutConfig {
                    co2_mode: Co2Mode::Stationary(stationary),
                    ..base
                },
            ),
        ],
        ExperimentPreset::StationaryForcing => vec![spec(
            "stationary",
            RolloutConfig {
                co2_mode: Co2Mode::Stationary(stationary),
                ..base
            },
        )],
        ExperimentPreset::BiasedSst { offset, smoothed } => {
            let k = offset as f64;
            let sst_mode = if smoothed { SstMode::BiasedSmoothed(k) } else { SstMode::Biased(k) };
            vec![spec("biased", RolloutConfig { sst_mode, ..base })]
        }
        ExperimentPreset::SpinupClimatology => vec![spec(
            "climatology",
            RolloutConfig {
                init_mode: InitMode::Climatology,
                ..base
            },
        )],
        ExperimentPreset::SpinupZero => vec![spec(
            "zero",
            RolloutConfig {
                init_mode: InitMode::Zero,
                ..base
            },
        )],
        ExperimentPreset::EraShift => {
            let last_full = year_of(data.header.time(0)) + (n / STEPS_PER_YEAR) as i64 - 1;
            let late = opts.late_year.unwrap_or(last_full);
            vec![
                spec(
                    "early",
                    RolloutConfig {
                        co2_mode: Co2Mode::Stationary(stationary),
                        ..base.clone()
                    },
                ),
                spec(
                    "late",
                    RolloutConfig {
                        co2_mode: Co2Mode::Stationary(late),
                        ..base
                    },
                ),
            ]
        }
    })
}

/// A produced file and its checksum.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub preset: String,
    pub manifest: Vec<ManifestEntry>,
    /// Surface and top-level trends (per decade) of each rollout.
    pub trends: Vec<(String, f64, f64)>,
}

impl ExperimentReport {
    pub fn manifest_text(&self) -> String {
        let mut s = format!("# preset {}\n", self.preset);
        for e in &self.manifest {
            let _ = writeln!(s, "{}  {}  {}", e.sha256, e.bytes, e.file);
        }
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn global_series(traj: &FieldContainer, level: usize) -> Result<Vec<f64>> {
    let grid = traj.header.grid()?;
    trend::global_mean_series(traj, layout::TEMPERATURE, level, &grid)
}

/// Runs a preset: rollouts in parallel, then trends, global-mean series and
/// a zonal climate-change map per rollout. Writes everything to `out_dir`.
pub fn run_experiment(preset: ExperimentPreset, emulator: &Emulator, data: &FieldContainer, opts: &ExperimentOptions, out_dir: &Path) -> Result<ExperimentReport> {
    let has_sst = emulator.layout().has_var(layout::SST);
    if preset.needs_sst() != has_sst {
        return Err(Error::Config(format!(
            "preset {} needs a checkpoint {} SST",
            preset.name(),
            if preset.needs_sst() { "trained with" } else { "trained without" }
        )));
    }
    let forcings = ForcingSeries::from_container(data, crate::forcing::SOLAR_CONSTANT)?;
    let specs = plan(preset, data, opts)?;
    let start_time = data.header.time(opts.start_index);
    let trajectories: Vec<FieldContainer> = specs
        .par_iter()
        .map(|s| {
            let init = initial_state(s.config.init_mode, data, emulator.layout(), Some(start_time))?;
            rollout_to_container(emulator, &init, &forcings, &s.config)
        })
        .collect::<Result<_>>()?;

    std::fs::create_dir_all(out_dir)?;
    let mut files: Vec<PathBuf> = Vec::new();
    let mut trends = Vec::new();
    let top = 0;
    let surface = emulator.grid().nlevels() - 1;
    let mut series_table = ReportTable::new(
        "global-mean-temperature",
        &specs.iter().flat_map(|_| ["surface", "top"]).collect::<Vec<_>>(),
    );
    series_table.columns = specs.iter().flat_map(|s| [format!("{}_surface", s.name), format!("{}_top", s.name)]).collect();
    let mut all_series = Vec::new();
    for (s, traj) in specs.iter().zip(&trajectories) {
        let path = out_dir.join(format!("{}.luc3", s.name));
        write_container(&path, traj)?;
        files.push(path);
        let (surf, topv) = (global_series(traj, surface)?, global_series(traj, top)?);
        let step = traj.header.time_step as f64;
        if traj.time_count() >= 2 {
            let mut fits = vec![trend::fit_trend(&surf, step)?, trend::fit_trend(&topv, step)?];
            fits[0].label = "surface".into();
            fits[1].label = "top".into();
            trends.push((s.name.clone(), fits[0].slope, fits[1].slope));
            let path = out_dir.join(format!("{}_trend.txt", s.name));
            trend_table(&fits).save(&path)?;
            files.push(path);
        }
        let n = traj.time_count();
        if n >= 2 {
            let half = n / 2;
            let map = climate_change_map(traj, layout::TEMPERATURE, 0..half, n - half..n)?;
            let grid = traj.header.grid()?;
            let path = out_dir.join(format!("{}_change_T.txt", s.name));
            zonal_map_table("climate-change", &map, &grid.sigma_levels, &grid.latitudes_deg()).save(&path)?;
            files.push(path);
        }
        all_series.push((surf, topv));
    }
    let len = all_series.iter().map(|(a, _)| a.len()).min().unwrap_or(0);
    for t in 0..len {
        series_table.push(all_series.iter().flat_map(|(a, b)| [a[t], b[t]]).collect());
    }
    let path = out_dir.join("global_mean_T.txt");
    series_table.save(&path)?;
    files.push(path);

    let mut manifest = Vec::new();
    for f in &files {
        let bytes = std::fs::read(f)?;
        manifest.push(ManifestEntry {
            file: f.file_name().expect("file path").to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    manifest.sort_by(|a, b| a.file.cmp(&b.file));
    let report = ExperimentReport {
        preset: preset.name(),
        manifest,
        trends,
    };
    std::fs::write(out_dir.join("manifest.txt"), report.manifest_text())?;
    Ok(report)
}

//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys not consumed by
//! any section are reported by [`KeyValues::finish`], so typos fail loudly.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::data::synth::{PlantedWave, SynthConfig};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Default)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets or replaces a value; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        raw.parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{key} = {raw:?} is not a valid value")))
    }

    fn update<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Errors if any key was never read.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.values.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let mut c = SynthConfig::default();
        self.update("seed", &mut c.seed)?;
        self.update("years", &mut c.years)?;
        self.update("start_year", &mut c.start_year)?;
        self.update("co2_start", &mut c.co2_start)?;
        self.update("co2_end", &mut c.co2_end)?;
        self.update("co2_reference", &mut c.co2_reference)?;
        self.update("forcing_sensitivity", &mut c.forcing_sensitivity)?;
        self.update("noise_amplitude", &mut c.noise_amplitude)?;
        self.update("persistence", &mut c.persistence)?;
        self.update("with_sst", &mut c.with_sst)?;
        self.update("solar_constant", &mut c.solar_constant)?;
        if let Some(w) = self.get::<String>("waves")? {
            c.waves = parse_waves(&w)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Grid truncation and size: `truncation`, `nlat`, `nlon` (default T7 on 12 x 24).
    pub fn grid_dims(&self) -> Result<(usize, usize, usize)> {
        let mut d = (7, 12, 24);
        self.update("truncation", &mut d.0)?;
        self.update("nlat", &mut d.1)?;
        self.update("nlon", &mut d.2)?;
        Ok(d)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        self.update("total_epochs", &mut c.total_epochs)?;
        self.update("finetune_epochs", &mut c.finetune_epochs)?;
        self.update("batch_size", &mut c.batch_size)?;
        self.update("lr_max", &mut c.lr_max)?;
        self.update("lr_min", &mut c.lr_min)?;
        self.update("weight_decay", &mut c.weight_decay)?;
        self.update("seed", &mut c.seed)?;
        self.update("val_fraction", &mut c.val_fraction)?;
        self.update("sample_stride", &mut c.sample_stride)?;
        self.update("adaptive_weighting", &mut c.adaptive_weighting)?;
        self.update("regularizer_weight", &mut c.regularizer.weight)?;
        self.update("regularizer_band", &mut c.regularizer.wavenumber_band)?;
        c.validate()?;
        Ok(c)
    }

    /// Model size: `model = desk | full`, then `num_blocks` and `latent_dim` overrides.
    pub fn model_config(&self, in_channels: usize, out_channels: usize, truncation: usize) -> Result<ModelConfig> {
        let kind = self.get::<String>("model")?.unwrap_or_else(|| "desk".into());
        let mut c = match kind.as_str() {
            "desk" => ModelConfig::desk(in_channels, out_channels, truncation),
            "full" => ModelConfig {
                truncation,
                ..ModelConfig::full(in_channels, out_channels)
            },
            other => return Err(Error::Config(format!("model = {other:?}: expected desk or full"))),
        };
        self.update("num_blocks", &mut c.num_blocks)?;
        self.update("latent_dim", &mut c.latent_dim)?;
        c.validate()?;
        Ok(c)
    }
}

/// `k:period_days:amplitude:sym|anti`, separated by `;`. Empty means no waves.
pub fn parse_waves(s: &str) -> Result<Vec<PlantedWave>> {
    s.split(';')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| {
            let f: Vec<&str> = w.split(':').collect();
            let bad = || Error::Config(format!("wave {w:?}: expected k:period:amplitude:sym|anti"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(PlantedWave {
                wavenumber: f[0].parse().map_err(|_| bad())?,
                period_days: f[1].parse().map_err(|_| bad())?,
                amplitude: f[2].parse().map_err(|_| bad())?,
                symmetric: match f[3] {
                    "sym" => true,
                    "anti" => false,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

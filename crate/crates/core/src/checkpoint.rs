//! Versioned binary checkpoint: model configuration, grid, channel layout,
//! normalization statistics and every parameter tensor.
//!
//! Little-endian throughout. Strings are `u16` length plus UTF-8 bytes.
//!
//! ```text
//! magic "LUCK" | version u32
//! model config: 7 x u32
//! grid: nlat u32, nlon u32, truncation u32, n_sigma u32, sigma f64 * n
//! layout: prognostic, diagnostic, forcing lists (u32 count; name, levels u32, role u8)
//! stats: u32 count; name, mean, std, tend_mean, tend_std (f64), degenerate u8, tend_degenerate u8
//! tensors: u32 count; name, ndim u32, dims u32 * ndim, f64 data
//! ```

use std::io::{Cursor, Read};
use std::path::Path;

use crate::data::norm::{ChannelStats, NormStats};
use crate::error::{Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::layout::{ChannelLayout, Role, VarSpec};
use crate::model::{ModelConfig, ModelParams, ParamTensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LUCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub layout: ChannelLayout,
    pub stats: NormStats,
}

impl Checkpoint {
    pub fn new(params: ModelParams, grid: GridSpec, layout: ChannelLayout, stats: NormStats) -> Result<Self> {
        params.validate()?;
        let c = &params.config;
        if c.in_channels != layout.n_in() || c.out_channels != layout.n_out() {
            return Err(Error::Config(format!(
                "model expects {}/{} channels, layout has {}/{}",
                c.in_channels,
                c.out_channels,
                layout.n_in(),
                layout.n_out()
            )));
        }
        if c.truncation != grid.truncation {
            return Err(Error::Truncation {
                expected: grid.truncation,
                got: c.truncation,
            });
        }
        Ok(Self {
            params,
            grid,
            layout,
            stats,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut w, CHECKPOINT_VERSION);
        let c = &self.params.config;
        for v in [
            c.num_blocks,
            c.latent_dim,
            c.encoder_layers,
            c.decoder_layers,
            c.truncation,
            c.in_channels,
            c.out_channels,
        ] {
            put_u32(&mut w, v as u32);
        }
        for v in [self.grid.nlat, self.grid.nlon, self.grid.truncation, self.grid.sigma_levels.len()] {
            put_u32(&mut w, v as u32);
        }
        for s in &self.grid.sigma_levels {
            put_f64(&mut w, *s);
        }
        for list in [&self.layout.prognostic, &self.layout.diagnostic, &self.layout.forcing] {
            put_u32(&mut w, list.len() as u32);
            for v in list {
                put_str(&mut w, &v.name);
                put_u32(&mut w, v.levels as u32);
                w.push(v.role.tag());
            }
        }
        put_u32(&mut w, self.stats.channels.len() as u32);
        for s in &self.stats.channels {
            put_str(&mut w, &s.name);
            for v in [s.mean, s.std, s.tend_mean, s.tend_std] {
                put_f64(&mut w, v);
            }
            w.push(s.degenerate as u8);
            w.push(s.tend_degenerate as u8);
        }
        put_u32(&mut w, self.params.tensors.len() as u32);
        for t in &self.params.tensors {
            put_str(&mut w, &t.name);
            put_u32(&mut w, t.shape.len() as u32);
            for d in &t.shape {
                put_u32(&mut w, *d as u32);
            }
            for v in &t.data {
                put_f64(&mut w, *v);
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        take(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = get_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mut cfg = [0usize; 7];
        for v in &mut cfg {
            *v = get_u32(&mut r)? as usize;
        }
        let config = ModelConfig {
            num_blocks: cfg[0],
            latent_dim: cfg[1],
            encoder_layers: cfg[2],
            decoder_layers: cfg[3],
            truncation: cfg[4],
            in_channels: cfg[5],
            out_channels: cfg[6],
        };
        let (nlat, nlon, trunc, nsig) = (get_u32(&mut r)?, get_u32(&mut r)?, get_u32(&mut r)?, get_u32(&mut r)?);
        let sigma = (0..nsig).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let grid = build_grid(trunc as usize, nlat as usize, nlon as usize)?.with_sigma_levels(sigma)?;
        let mut lists = Vec::new();
        for _ in 0..3 {
            let n = get_u32(&mut r)?;
            let mut list = Vec::new();
            for _ in 0..n {
                let name = get_str(&mut r)?;
                let levels = get_u32(&mut r)? as usize;
                let role = Role::from_tag(get_u8(&mut r)?)?;
                list.push(VarSpec { name, levels, role });
            }
            lists.push(list);
        }
        let forcing = lists.pop().expect("three lists");
        let diagnostic = lists.pop().expect("three lists");
        let prognostic = lists.pop().expect("three lists");
        let layout = ChannelLayout::new(prognostic, diagnostic, forcing)?;
        let n = get_u32(&mut r)?;
        let mut channels = Vec::new();
        for _ in 0..n {
            let name = get_str(&mut r)?;
            let (mean, std, tend_mean, tend_std) = (get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?);
            let degenerate = get_u8(&mut r)? != 0;
            let tend_degenerate = get_u8(&mut r)? != 0;
            channels.push(ChannelStats {
                name,
                mean,
                std,
                tend_mean,
                tend_std,
                degenerate,
                tend_degenerate,
            });
        }
        let n = get_u32(&mut r)?;
        let mut tensors = Vec::new();
        for _ in 0..n {
            let name = get_str(&mut r)?;
            let ndim = get_u32(&mut r)?;
            if ndim > 8 {
                return Err(Error::Format(format!("tensor {name} has {ndim} dimensions")));
            }
            let shape = (0..ndim).map(|_| get_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            if len * 8 > bytes.len() {
                return Err(Error::Format(format!("tensor {name} larger than file")));
            }
            let data = (0..len).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            tensors.push(ParamTensor { name, shape, data });
        }
        if r.position() as usize != bytes.len() {
            return Err(Error::PayloadLength {
                expected: r.position(),
                found: bytes.len() as u64,
            });
        }
        let params = ModelParams { config, tensors };
        Self::new(params, grid, layout, NormStats { channels })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    w.extend_from_slice(&(s.len() as u16).to_le_bytes());
    w.extend_from_slice(s.as_bytes());
}

fn take(r: &mut Cursor<&[u8]>, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Format("truncated checkpoint".into()))
}

fn get_u8(r: &mut Cursor<&[u8]>) -> Result<u8> {
    let mut b = [0u8; 1];
    take(r, &mut b)?;
    Ok(b[0])
}

fn get_u32(r: &mut Cursor<&[u8]>) -> Result<u32> {
    let mut b = [0u8; 4];
    take(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut Cursor<&[u8]>) -> Result<f64> {
    let mut b = [0u8; 8];
    take(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_str(r: &mut Cursor<&[u8]>) -> Result<String> {
    let mut b = [0u8; 2];
    take(r, &mut b)?;
    let mut s = vec![0u8; u16::from_le_bytes(b) as usize];
    take(r, &mut s)?;
    String::from_utf8(s).map_err(|_| Error::Format("string is not UTF-8".into()))
}

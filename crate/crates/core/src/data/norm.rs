//! Per-channel normalization statistics of full fields and one-step tendencies.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::container::{ContainerHeader, ContainerReader, FieldContainer};
use crate::error::{Error, Result};
use crate::layout::Channel;

/// A standard deviation at or below this fraction of `max(1, |mean|)` counts as zero.
const DEGENERATE_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub tend_mean: f64,
    pub tend_std: f64,
    pub degenerate: bool,
    pub tend_degenerate: bool,
}

impl ChannelStats {
    /// Divisor used for z-scores; 1 for degenerate channels.
    pub fn scale(&self) -> f64 {
        if self.degenerate {
            1.0
        } else {
            self.std
        }
    }

    /// Divisor used for tendencies; 1 for degenerate channels.
    pub fn tend_scale(&self) -> f64 {
        if self.tend_degenerate {
            1.0
        } else {
            self.tend_std
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub channels: Vec<ChannelStats>,
}

impl NormStats {
    pub fn get(&self, name: &str) -> Result<&ChannelStats> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Missing(format!("normalization statistics for {name}")))
    }

    pub fn flagged(&self) -> Vec<String> {
        self.channels
            .iter()
            .filter(|c| c.degenerate || c.tend_degenerate)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Whitespace-separated table, one channel per line. Values use the
    /// shortest round-trip decimal form, so parsing is exact.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# channel mean std tend_mean tend_std degenerate tend_degenerate\n");
        for c in &self.channels {
            let _ = writeln!(
                s,
                "{} {:?} {:?} {:?} {:?} {} {}",
                c.name, c.mean, c.std, c.tend_mean, c.tend_std, c.degenerate as u8, c.tend_degenerate as u8
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut channels = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(Error::Format(format!("stats line {}: expected 7 fields", n + 1)));
            }
            let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("stats line {}: bad number {s:?}", n + 1))) };
            channels.push(ChannelStats {
                name: f[0].to_string(),
                mean: num(f[1])?,
                std: num(f[2])?,
                tend_mean: num(f[3])?,
                tend_std: num(f[4])?,
                degenerate: f[5] == "1",
                tend_degenerate: f[6] == "1",
            });
        }
        Ok(Self { channels })
    }
}

/// Mean and M2 for one channel; merged per step with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push_block(&mut self, values: impl Iterator<Item = f64> + Clone) {
        let (mut k, mut sum) = (0.0, 0.0);
        for v in values.clone() {
            k += 1.0;
            sum += v;
        }
        if k == 0.0 {
            return;
        }
        let mean_b = sum / k;
        let m2_b: f64 = values.map(|v| (v - mean_b) * (v - mean_b)).sum();
        let n = self.n + k;
        let delta = mean_b - self.mean;
        self.mean += delta * k / n;
        self.m2 += m2_b + delta * delta * self.n * k / n;
        self.n = n;
    }

    fn std(&self) -> f64 {
        if self.n == 0.0 {
            0.0
        } else {
            (self.m2 / self.n).max(0.0).sqrt()
        }
    }
}

fn is_degenerate(std: f64, mean: f64) -> bool {
    std <= DEGENERATE_REL * mean.abs().max(1.0)
}

/// Incremental statistics over time steps of a container layout.
pub struct NormAccumulator {
    names: Vec<String>,
    npoints: usize,
    full: Vec<Moments>,
    tend: Vec<Moments>,
    prev: Option<Vec<f64>>,
    steps: usize,
}

impl NormAccumulator {
    pub fn new(header: &ContainerHeader) -> Self {
        let mut names = Vec::new();
        for v in &header.vars {
            for k in 0..v.levels {
                let level = (v.levels > 1).then_some(k);
                names.push(
                    Channel {
                        var: v.name.clone(),
                        level,
                    }
                    .name(),
                );
            }
        }
        let nch = names.len();
        Self {
            names,
            npoints: header.npoints(),
            full: vec![Moments::default(); nch],
            tend: vec![Moments::default(); nch],
            prev: None,
            steps: 0,
        }
    }

    pub fn push(&mut self, step: &[f64]) -> Result<()> {
        let np = self.npoints;
        if step.len() != np * self.names.len() {
            return Err(Error::Shape {
                expected: vec![self.names.len(), np],
                got: vec![step.len()],
            });
        }
        for c in 0..self.names.len() {
            let cur = &step[c * np..(c + 1) * np];
            self.full[c].push_block(cur.iter().copied());
            if let Some(prev) = &self.prev {
                let p = &prev[c * np..(c + 1) * np];
                self.tend[c].push_block(cur.iter().zip(p).map(|(a, b)| a - b));
            }
        }
        self.prev = Some(step.to_vec());
        self.steps += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<NormStats> {
        if self.steps < 2 {
            return Err(Error::Invalid(format!("need at least 2 time steps, got {}", self.steps)));
        }
        let channels = self
            .names
            .into_iter()
            .enumerate()
            .map(|(c, name)| {
                let (f, t) = (self.full[c], self.tend[c]);
                let (std, tend_std) = (f.std(), t.std());
                ChannelStats {
                    name,
                    mean: f.mean,
                    std,
                    tend_mean: t.mean,
                    tend_std,
                    degenerate: is_degenerate(std, f.mean),
                    tend_degenerate: is_degenerate(tend_std, t.mean),
                }
            })
            .collect();
        Ok(NormStats { channels })
    }
}

/// Unweighted per-channel statistics over all times and grid points.
pub fn compute_norm_stats(data: &FieldContainer) -> Result<NormStats> {
    let mut acc = NormAccumulator::new(&data.header);
    for t in 0..data.time_count() {
        acc.push(data.step(t))?;
    }
    acc.finish()
}

/// Same as [`compute_norm_stats`], streaming a container file step by step.
pub fn compute_norm_stats_file(path: impl AsRef<Path>) -> Result<NormStats> {
    let mut r = ContainerReader::open(path)?;
    let mut acc = NormAccumulator::new(r.header());
    while let Some(step) = r.read_step()? {
        acc.push(&step)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::container::ContainerHeader;
    use crate::grid::build_grid;
    use crate::layout::{Role, VarSpec};

    fn container(steps: &[Vec<f64>], levels: usize) -> FieldContainer {
        let g = build_grid(1, 2, 3).unwrap();
        let h = ContainerHeader::new(&g, 0, 1, vec![VarSpec::new("X", levels, Role::Prognostic)]).unwrap();
        let mut c = FieldContainer::new(h).unwrap();
        for s in steps {
            c.push_step(s).unwrap();
        }
        c
    }

    #[test]
    fn constant_channel_flagged() {
        let c = container(&[vec![5.0; 6], vec![5.0; 6], vec![5.0; 6]], 1);
        let s = compute_norm_stats(&c).unwrap();
        let x = s.get("X").unwrap();
        assert_eq!(x.mean, 5.0);
        assert_eq!(x.std, 0.0);
        assert!(x.degenerate && x.tend_degenerate);
        assert_eq!(x.scale(), 1.0);
    }

    #[test]
    fn uniform_tendency() {
        let c = container(&[vec![0.0; 6], vec![2.0; 6]], 1);
        let x = compute_norm_stats(&c).unwrap().channels[0].clone();
        assert_eq!(x.tend_mean, 2.0);
        assert_eq!(x.tend_std, 0.0);
        assert!(x.tend_degenerate);
        assert!(!x.degenerate);
    }

    #[test]
    fn needs_two_steps() {
        assert!(compute_norm_stats(&container(&[vec![1.0; 6]], 1)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = container(&[vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0], vec![1.0 / 3.0; 12]], 2);
        let s = compute_norm_stats(&c).unwrap();
        assert_eq!(s.channels[1].name, "X@1");
        assert_eq!(NormStats::from_text(&s.to_text()).unwrap(), s);
    }
}

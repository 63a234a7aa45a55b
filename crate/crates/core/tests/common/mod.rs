//! Shared setups and oracles for the integration and acceptance tests.
#![allow(dead_code)]

pub mod diag_suite;
pub mod grad_suite;
pub mod sht_suite;

use std::path::PathBuf;

use lucie3d::data::{compute_norm_stats, generate_synthetic_climate, ContainerHeader, Dataset, FieldContainer, NormStats, SynthConfig};
use lucie3d::layout::{ChannelLayout, Role, VarSpec};
use lucie3d::model::ModelConfig;
use lucie3d::rollout::smooth_sst;
use lucie3d::trainer::{train, TrainConfig, TrainOutcome};
use lucie3d::GridSpec;

pub fn synthetic(years: usize, grid: &GridSpec) -> (FieldContainer, NormStats) {
    let cfg = SynthConfig { years, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, grid).unwrap();
    let stats = compute_norm_stats(&data).unwrap();
    (data, stats)
}

/// A 50-epoch run of a one-block model on a handful of T7 samples, with
/// validation, adaptive weighting and the finetune regularizer all enabled.
pub fn bookkeeping_run() -> TrainOutcome {
    let g = GridSpec::t7().unwrap();
    let (data, stats) = synthetic(1, &g);
    let layout = ChannelLayout::standard(g.nlevels(), false);
    let ds = Dataset::new(&data, layout.clone(), &stats).unwrap();
    let tc = TrainConfig {
        total_epochs: 50,
        finetune_epochs: 30,
        batch_size: 4,
        lr_max: 1e-3,
        lr_min: 1e-5,
        sample_stride: 120,
        ..Default::default()
    };
    let mc = ModelConfig {
        num_blocks: 1,
        latent_dim: 4,
        ..ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation)
    };
    train(&ds, &stats, &tc, &mc, &g).unwrap()
}

/// Violations of the epoch bookkeeping rules; empty when the run is correct.
pub fn bookkeeping_violations(out: &TrainOutcome) -> Vec<String> {
    let mut bad = Vec::new();
    let recs = &out.history.records;
    if recs.len() != 50 {
        bad.push(format!("{} epoch records", recs.len()));
        return bad;
    }
    let initial: Vec<f64> = out.history.channels.iter().map(|c| if c.starts_with("logP") || c == "TP" { 0.5 } else { 1.0 }).collect();
    let mut current = initial;
    for (e, r) in recs.iter().enumerate() {
        let expect_update = e >= 20 && (e - 20) % 10 == 0;
        if r.weights_updated != expect_update {
            bad.push(format!("epoch {e}: weights_updated = {}", r.weights_updated));
        }
        if expect_update {
            let prev = &recs[e - 1].val_channel;
            current = out
                .history
                .channels
                .iter()
                .zip(prev)
                .map(|(c, v)| {
                    let f = if c.starts_with("logP") || c == "TP" { 0.5 } else { 1.0 };
                    0.005 / v.max(1e-8) * f
                })
                .collect();
        }
        for (c, (w, want)) in r.weights.iter().zip(&current).enumerate() {
            if (w - want).abs() > 1e-14 * want.abs() {
                bad.push(format!("epoch {e}: weight of {} is {w}, expected {want}", out.history.channels[c]));
            }
        }
        let reg = r.train.regularizer;
        let finetune = e >= 20;
        if r.finetune != finetune || (finetune && !(reg > 0.0)) || (!finetune && reg != 0.0) {
            bad.push(format!("epoch {e}: finetune {} with regularizer {reg}", r.finetune));
        }
    }
    bad
}

pub const GOLDEN_SHA256: &str = "fe9a1c818ec8a3929d146276b1087e1aff6b2a9472af6cc811c4847860f056a9";

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_t30.luc3")
}

/// Dyadic values, exactly representable, so the payload is checked bit for bit.
pub fn golden_value(t: usize, var: usize, i: usize, j: usize) -> f64 {
    let base = if var == 0 { 11.5 } else { 340.0 };
    base + t as f64 * 0.25 + i as f64 / 64.0 - j as f64 / 128.0
}

pub fn golden_container() -> FieldContainer {
    let g = GridSpec::t30().unwrap();
    let vars = vec![VarSpec::new("logP", 1, Role::Prognostic), VarSpec::new("CO2", 1, Role::Forcing)];
    let header = ContainerHeader::new(&g, 86_400, 21_600, vars).unwrap();
    let mut c = FieldContainer::new(header).unwrap();
    for t in 0..3 {
        let mut step = Vec::with_capacity(2 * g.npoints());
        for v in 0..2 {
            for i in 0..g.nlat {
                for j in 0..g.nlon {
                    step.push(golden_value(t, v, i, j));
                }
            }
        }
        c.push_step(&step).unwrap();
    }
    c
}

/// Mask-normalized Gaussian average by a direct double loop over the
/// footprint, periodic in longitude and clamped in latitude.
pub fn brute_force_average(sst: &[f64], mask: &[f64], nlat: usize, nlon: usize, sigma: f64, i: usize, j: usize) -> Option<f64> {
    let r = (4.0 * sigma).floor() as i64;
    let (mut num, mut den) = (0.0, 0.0);
    for di in -r..=r {
        for dj in -r..=r {
            let w = (-((di * di + dj * dj) as f64) / (2.0 * sigma * sigma)).exp();
            let ii = (i as i64 + di).clamp(0, nlat as i64 - 1) as usize;
            let jj = (j as i64 + dj).rem_euclid(nlon as i64) as usize;
            let o = 1.0 - mask[ii * nlon + jj];
            num += w * o * sst[ii * nlon + jj];
            den += w * o;
        }
    }
    (den > 0.0).then(|| num / den)
}

pub fn has_ocean_in_footprint(mask: &[f64], nlat: usize, nlon: usize, sigma: f64, i: usize, j: usize) -> bool {
    let r = (4.0 * sigma).floor() as i64;
    (-r..=r).any(|di| {
        (-r..=r).any(|dj| {
            let ii = (i as i64 + di).clamp(0, nlat as i64 - 1) as usize;
            let jj = (j as i64 + dj).rem_euclid(nlon as i64) as usize;
            mask[ii * nlon + jj] < 1.0
        })
    })
}

pub fn check_against_oracle(sst: &[f64], mask: &[f64], nlat: usize, nlon: usize, sigma: f64) -> (usize, usize) {
    let out = smooth_sst(sst, mask, nlat, nlon, sigma).unwrap();
    let (mut coastal, mut inland) = (0, 0);
    for i in 0..nlat {
        for j in 0..nlon {
            let p = i * nlon + j;
            let m = mask[p];
            if m == 0.0 {
                assert_eq!(out.field[p], sst[p], "ocean point ({i},{j}) changed");
            } else if !has_ocean_in_footprint(mask, nlat, nlon, sigma, i, j) {
                assert_eq!(out.field[p], sst[p], "inland point ({i},{j}) changed");
                inland += 1;
            } else {
                let c = brute_force_average(sst, mask, nlat, nlon, sigma, i, j).unwrap();
                let want = (1.0 - m) * sst[p] + m * c;
                assert!((out.field[p] - want).abs() < 1e-10, "coastal ({i},{j}): {} vs {want}", out.field[p]);
                coastal += 1;
            }
        }
    }
    (coastal, inland)
}


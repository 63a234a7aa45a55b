//! End-to-end acceptance run: one pass/fail line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. Exits nonzero if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use common::{diag_suite, grad_suite, sht_suite};
use lucie3d::checkpoint::Checkpoint;
use lucie3d::data::{compute_norm_stats, generate_synthetic_climate, Dataset, FieldContainer, NormStats, SynthConfig};
use lucie3d::diagnostics::trend::{annual_means, fit_trend};
use lucie3d::experiment::{run_experiment, ExperimentOptions, ExperimentPreset};
use lucie3d::forcing::{SOLAR_CONSTANT, STEPS_PER_YEAR, STEP_SECONDS};
use lucie3d::layout::ChannelLayout;
use lucie3d::model::{ModelConfig, ModelParams};
use lucie3d::rollout::{initial_state, run_rollout, Co2Mode, Emulator, ForcingSeries, InitMode, RolloutConfig, DEFAULT_KERNEL_SIGMA};
use lucie3d::sht::quadrature_mean;
use lucie3d::trainer::{train, TrainConfig};
use lucie3d::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn criterion_1() -> Outcome {
    sht_suite::p48_nodes_and_weights_match_bisection_oracle();
    sht_suite::round_trip_and_parseval_t15();
    sht_suite::round_trip_and_parseval_t30();
    sht_suite::quadrature_exact_to_degree_2n_minus_1();
    Ok("round trip and Parseval on 50 fields at T15 and T30, quadrature to degree 2n-1".into())
}

fn criterion_2() -> Outcome {
    grad_suite::weighted_l2_gradient();
    grad_suite::spectral_regularizer_gradient();
    grad_suite::sfno_block_gradient();
    grad_suite::total_loss_through_one_block_model();
    Ok("weighted L2, regularizer, SFNO block and total loss agree with central differences".into())
}

fn criterion_3() -> Outcome {
    let out = common::bookkeeping_run();
    let bad = common::bookkeeping_violations(&out);
    if bad.is_empty() {
        Ok("weights refresh at epochs 20/30/40 from validation losses, regularizer only in the last 30".into())
    } else {
        Err(bad.join("; "))
    }
}

fn overfit_run() -> (f64, f64, Vec<u8>) {
    let g = GridSpec::t7().unwrap();
    let cfg = SynthConfig {
        years: 1,
        noise_amplitude: 0.0,
        ..Default::default()
    };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    let stats = compute_norm_stats(&data).unwrap();
    let layout = ChannelLayout::standard(g.nlevels(), false);
    let ds = Dataset::new(&data, layout.clone(), &stats).unwrap();
    let tc = TrainConfig {
        total_epochs: 500,
        finetune_epochs: 0,
        batch_size: 8,
        lr_max: 1e-3,
        lr_min: 1e-5,
        weight_decay: 0.0,
        val_fraction: 0.0,
        sample_stride: 180,
        adaptive_weighting: false,
        seed: 7,
        ..Default::default()
    };
    let mc = ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation);
    let out = train(&ds, &stats, &tc, &mc, &g).unwrap();
    let recs = &out.history.records;
    (recs[0].train.total(), recs.last().unwrap().train.total(), out.checkpoint.to_bytes())
}

fn criterion_4() -> Outcome {
    let (first, last, bytes) = overfit_run();
    let (_, _, again) = overfit_run();
    let reduction = 1.0 - last / first;
    let msg = format!("loss {first:.4e} -> {last:.4e}, reduction {:.3}%", 100.0 * reduction);
    if bytes != again {
        return Err(format!("{msg}; repeated run differs"));
    }
    if reduction > 0.99 {
        Ok(format!("{msg}; repeated run bit-identical"))
    } else {
        Err(msg)
    }
}

/// Desk-scale model trained once on ten synthetic years, shared by criteria 5 and 6.
struct DeskRun {
    cfg: SynthConfig,
    data: FieldContainer,
    stats: NormStats,
    emulator: Emulator,
}

const DESK_EPOCHS: usize = 40;
const DESK_STRIDE: usize = 8;
const DESK_LATENT: usize = 64;

fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let g = GridSpec::t7().unwrap();
        let cfg = SynthConfig::default();
        let data = generate_synthetic_climate(&cfg, &g).unwrap();
        let stats = compute_norm_stats(&data).unwrap();
        let layout = ChannelLayout::standard(g.nlevels(), false);
        let ds = Dataset::new(&data, layout.clone(), &stats).unwrap();
        let tc = TrainConfig {
            total_epochs: DESK_EPOCHS,
            finetune_epochs: DESK_EPOCHS / 8,
            batch_size: 16,
            lr_max: 1e-3,
            lr_min: 1e-6,
            sample_stride: DESK_STRIDE,
            ..Default::default()
        };
        // A latent narrower than the channel count leaves channel combinations
        // the network cannot damp, and rollouts drift along them.
        let mc = ModelConfig {
            latent_dim: DESK_LATENT,
            ..ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation)
        };
        let out = train(&ds, &stats, &tc, &mc, &g).unwrap();
        let emulator = Emulator::new(out.checkpoint).unwrap();
        DeskRun { cfg, data, stats, emulator }
    })
}

/// Global-mean temperature at the surface and top level for each recorded step.
fn rollout_means(run: &DeskRun, start: usize, horizon: usize, co2_mode: Co2Mode) -> (Vec<f64>, Vec<f64>) {
    let g = run.emulator.grid().clone();
    let np = g.npoints();
    let nlev = g.nlevels();
    let forcings = ForcingSeries::from_container(&run.data, SOLAR_CONSTANT).unwrap();
    let init = initial_state(InitMode::State(start), &run.data, run.emulator.layout(), None).unwrap();
    let config = RolloutConfig {
        horizon,
        co2_mode,
        ..Default::default()
    };
    let (mut surf, mut top) = (Vec::new(), Vec::new());
    let mut sink = |f: &[f64]| -> lucie3d::Result<()> {
        surf.push(quadrature_mean(&f[(nlev - 1) * np..nlev * np], &g)?);
        top.push(quadrature_mean(&f[..np], &g)?);
        Ok(())
    };
    run_rollout(&run.emulator, &init, &forcings, &config, &mut sink).unwrap();
    (surf, top)
}

fn annual_slope(series: &[f64]) -> f64 {
    let annual = annual_means(series, STEP_SECONDS).unwrap();
    fit_trend(&annual, lucie3d::forcing::YEAR_SECONDS as f64).unwrap().slope
}

fn criterion_5() -> Outcome {
    let run = desk_run();
    let start = 6 * STEPS_PER_YEAR;
    let horizon = 4 * STEPS_PER_YEAR - 1;
    let (surf, top) = rollout_means(run, start, horizon, Co2Mode::Observed);
    let (still, _) = rollout_means(run, start, horizon, Co2Mode::Stationary(6));
    let (rising, top_rising, stationary) = (annual_slope(&surf), annual_slope(&top), annual_slope(&still));
    let want = run.cfg.analytic_surface_trend();
    let ratio = stationary.abs() / rising.abs();
    let msg = format!(
        "surface {rising:+.3} K/decade (analytic {want:+.3}), top {top_rising:+.3}, stationary {stationary:+.3} ({:.1}% of rising)",
        100.0 * ratio
    );
    let ok = rising.is_finite() && (rising - want).abs() <= 0.5 * want.abs() && ratio < 0.25 && top_rising.signum() == -rising.signum();
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let run = desk_run();
    let g = run.emulator.grid().clone();
    let np = g.npoints();
    let nprog = run.emulator.layout().n_prognostic();
    // Training envelope per prognostic channel, widened to 1.5x its range about the centre.
    let mut lo = vec![f64::INFINITY; nprog];
    let mut hi = vec![f64::NEG_INFINITY; nprog];
    for t in 0..run.data.time_count() {
        let s = run.data.step(t);
        for c in 0..nprog {
            for v in &s[c * np..(c + 1) * np] {
                lo[c] = lo[c].min(*v);
                hi[c] = hi[c].max(*v);
            }
        }
    }
    let env: Vec<(f64, f64)> = lo.iter().zip(&hi).map(|(a, b)| (a - 0.25 * (b - a), b + 0.25 * (b - a))).collect();
    let forcings = ForcingSeries::from_container(&run.data, SOLAR_CONSTANT).unwrap();
    let init = initial_state(InitMode::State(0), &run.data, run.emulator.layout(), None).unwrap();
    let config = RolloutConfig {
        horizon: 10 * STEPS_PER_YEAR - 1,
        ..Default::default()
    };
    let names = run.emulator.layout().input_names();
    let mut first_breach: Option<String> = None;
    let mut steps = 0usize;
    let mut sink = |f: &[f64]| -> lucie3d::Result<()> {
        if first_breach.is_none() {
            for (c, (a, b)) in env.iter().enumerate() {
                if let Some(v) = f[c * np..(c + 1) * np].iter().find(|v| !(**v >= *a && **v <= *b)) {
                    first_breach = Some(format!("{} = {v:e} at step {steps}, envelope [{a:e}, {b:e}]", names[c]));
                    break;
                }
            }
        }
        steps += 1;
        Ok(())
    };
    let r = run_rollout(&run.emulator, &init, &forcings, &config, &mut sink);
    let _ = &run.stats;
    match (r, first_breach) {
        (Err(e), _) => Err(format!("rollout stopped: {e}")),
        (Ok(_), Some(b)) => Err(b),
        (Ok(s), None) => Ok(format!("{} steps, all prognostic channels inside the envelope", s.recorded)),
    }
}

fn criterion_7() -> Outcome {
    diag_suite::wk_planted_eastward_and_westward();
    diag_suite::eof_recovers_planted_mode();
    diag_suite::eof_variance_ratio_four_to_one();
    diag_suite::ssw_constructed_reversal();
    diag_suite::trend_matches_normal_equations();
    Ok("WK peak at (+3, 0.1 cpd), planted EOF and 4:1 ratio, SSW events, OLS trend".into())
}

fn criterion_8() -> Outcome {
    let (nlat, nlon) = (24, 48);
    let mask: Vec<f64> = (0..nlat * nlon).map(|p| if (12..36).contains(&(p % nlon)) { 1.0 } else { 0.0 }).collect();
    let sst: Vec<f64> = (0..nlat * nlon).map(|p| if mask[p] == 1.0 { 270.0 } else { 290.0 + 0.2 * (p / nlon) as f64 }).collect();
    let (coastal, inland) = common::check_against_oracle(&sst, &mask, nlat, nlon, DEFAULT_KERNEL_SIGMA);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let islands: Vec<f64> = (0..nlat * nlon).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
    let field: Vec<f64> = (0..nlat * nlon).map(|_| rng.gen_range(275.0..305.0)).collect();
    common::check_against_oracle(&field, &islands, nlat, nlon, DEFAULT_KERNEL_SIGMA);
    let flat = lucie3d::rollout::smooth_sst(&vec![290.0; nlat * nlon], &vec![0.0; nlat * nlon], nlat, nlon, DEFAULT_KERNEL_SIGMA).unwrap();
    let err = flat.field.iter().map(|v| (v - 290.0).abs()).fold(0.0, f64::max);
    if err >= 1e-12 {
        return Err(format!("all-ocean constant drifted by {err:e}"));
    }
    Ok(format!("{coastal} coastal points match the direct convolution, {inland} inland points unchanged"))
}

fn criterion_9() -> Outcome {
    let bytes = std::fs::read(common::golden_path()).map_err(|e| e.to_string())?;
    if lucie3d::experiment::sha256_hex(&bytes) != common::GOLDEN_SHA256 {
        return Err("golden fixture checksum changed".into());
    }
    let c = FieldContainer::from_bytes(&bytes).map_err(|e| e.to_string())?;
    if c != common::golden_container() || c.to_bytes() != bytes {
        return Err("golden fixture does not parse to the analytic payload".into());
    }

    let g = GridSpec::t7().unwrap();
    let synth = SynthConfig { years: 1, seed: 21, ..Default::default() };
    let data = generate_synthetic_climate(&synth, &g).unwrap();
    if data != generate_synthetic_climate(&synth, &g).unwrap() {
        return Err("synthetic data not reproducible".into());
    }
    let stats = compute_norm_stats(&data).unwrap();
    let layout = ChannelLayout::standard(g.nlevels(), false);
    let mc = ModelConfig {
        num_blocks: 1,
        latent_dim: 8,
        ..ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation)
    };
    let mut params = ModelParams::init(mc, 3).unwrap();
    params.tensors.iter_mut().for_each(|t| t.data.iter_mut().for_each(|v| *v *= 0.05));
    let ck = Checkpoint::new(params, g, layout, stats).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ck");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    if back.to_bytes() != ck.to_bytes() || back != ck {
        return Err("checkpoint round trip not bit-exact".into());
    }

    let em = Emulator::new(back).unwrap();
    let opts = ExperimentOptions {
        horizon: Some(40),
        stride: 4,
        ..Default::default()
    };
    let a = run_experiment(ExperimentPreset::ForcingResponse, &em, &data, &opts, &dir.path().join("a")).unwrap();
    let b = run_experiment(ExperimentPreset::ForcingResponse, &em, &data, &opts, &dir.path().join("b")).unwrap();
    if a.manifest_text() != b.manifest_text() {
        return Err("experiment manifests differ between identical runs".into());
    }
    Ok(format!("fixture sha256 {}, checkpoint bit-exact, {} manifest entries reproduced", &common::GOLDEN_SHA256[..12], a.manifest.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("transform suite", criterion_1),
        ("gradient suite", criterion_2),
        ("training bookkeeping", criterion_3),
        ("overfit sanity", criterion_4),
        ("forcing-response separation", criterion_5),
        ("rollout stability", criterion_6),
        ("diagnostics oracles", criterion_7),
        ("SST smoothing", criterion_8),
        ("format stability", criterion_9),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

mod common;

use common::check_against_oracle;
use lucie3d::checkpoint::Checkpoint;
use lucie3d::data::{compute_norm_stats, generate_synthetic_climate, FieldContainer, SynthConfig};
use lucie3d::forcing::{interpolate_co2, MonthlySeries, MONTH_SECONDS, STEPS_PER_YEAR};
use lucie3d::layout::{self, ChannelLayout};
use lucie3d::model::{ModelConfig, ModelParams};
use lucie3d::rollout::*;
use lucie3d::GridSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn step_profile_coast_matches_brute_force_and_inland_is_exact() {
    let (nlat, nlon) = (24, 48);
    let mask: Vec<f64> = (0..nlat * nlon).map(|p| if (12..36).contains(&(p % nlon)) { 1.0 } else { 0.0 }).collect();
    let sst: Vec<f64> = (0..nlat * nlon)
        .map(|p| if mask[p] == 1.0 { 270.0 } else { 295.0 + 0.3 * (p / nlon) as f64 - 0.1 * (p % nlon) as f64 })
        .collect();
    let (coastal, inland) = check_against_oracle(&sst, &mask, nlat, nlon, DEFAULT_KERNEL_SIGMA);
    assert!(coastal > 0 && inland > 0);
}

#[test]
fn random_island_masks_match_brute_force() {
    let (nlat, nlon) = (20, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..4 {
        // Blocky continents, with fractional coastline values on one trial.
        let mut mask = vec![0.0; nlat * nlon];
        for _ in 0..3 {
            let (ci, cj, h, w) = (rng.gen_range(0..nlat), rng.gen_range(0..nlon), rng.gen_range(3..12), rng.gen_range(5..20));
            for i in ci..(ci + h).min(nlat) {
                for j in cj..cj + w {
                    mask[i * nlon + j % nlon] = 1.0;
                }
            }
        }
        if trial == 3 {
            for m in mask.iter_mut().step_by(7) {
                *m *= 0.5;
            }
        }
        let sst: Vec<f64> = mask.iter().map(|m| if *m == 1.0 { 270.0 } else { rng.gen_range(280.0..305.0) }).collect();
        check_against_oracle(&sst, &mask, nlat, nlon, 1.0 + 0.5 * trial as f64);
    }
}

#[test]
fn constant_ocean_preserved_and_all_land_is_noop() {
    let (nlat, nlon) = (12, 24);
    let out = smooth_sst(&vec![290.0; nlat * nlon], &vec![0.0; nlat * nlon], nlat, nlon, 1.5).unwrap();
    assert!(out.field.iter().all(|v| (v - 290.0).abs() < 1e-12));
    let mut mask = vec![0.0; nlat * nlon];
    mask[5 * nlon..7 * nlon].iter_mut().for_each(|m| *m = 1.0);
    let sst: Vec<f64> = mask.iter().map(|m| if *m == 1.0 { 270.0 } else { 290.0 }).collect();
    let out = smooth_sst(&sst, &mask, nlat, nlon, 1.5).unwrap();
    assert!(out.field.iter().all(|v| (v - 290.0).abs() < 1e-12 || *v == 270.0));
    let land = smooth_sst(&sst, &vec![1.0; nlat * nlon], nlat, nlon, 1.5).unwrap();
    assert!(land.noop);
    assert_eq!(land.field, sst);
}

#[test]
fn co2_interpolation_matches_piecewise_linear_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..30).map(|_| rng.gen_range(330.0..420.0)).collect();
    let series = MonthlySeries::new(3, values.clone()).unwrap();
    for _ in 0..500 {
        let m = rng.gen_range(3..32) as i64;
        let frac = rng.gen_range(0.0..1.0);
        let t0 = MonthlySeries::anchor_time(m);
        let t = t0 + (frac * MONTH_SECONDS as f64) as i64;
        let exact_frac = (t - t0) as f64 / MONTH_SECONDS as f64;
        let (a, b) = (values[(m - 3) as usize], values[(m - 2) as usize]);
        let want = a + exact_frac * (b - a);
        assert!((interpolate_co2(&series, t).unwrap() - want).abs() < 1e-12);
    }
    let s = MonthlySeries::new(0, vec![340.0, 342.0]).unwrap();
    let mid = (MonthlySeries::anchor_time(0) + MonthlySeries::anchor_time(1)) / 2;
    assert_eq!(interpolate_co2(&s, mid).unwrap(), 341.0);
    assert_eq!(interpolate_co2(&s, MonthlySeries::anchor_time(1)).unwrap(), 342.0);
    assert!(interpolate_co2(&s, MonthlySeries::anchor_time(1) + 1).is_err());
}

#[test]
fn euler_half_steps_equal_full_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let c: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let half = euler_step(&euler_step(&x, &c, 0.5).unwrap(), &c, 0.5).unwrap();
    let full = euler_step(&x, &c, 1.0).unwrap();
    for (a, b) in half.iter().zip(&full) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(euler_step(&[1.0], &[f64::NAN], 1.0).is_err());
}

fn small_setup(years: usize, with_sst: bool) -> (Emulator, FieldContainer) {
    let g = GridSpec::t7().unwrap();
    let cfg = SynthConfig { years, with_sst, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    let stats = compute_norm_stats(&data).unwrap();
    let layout = ChannelLayout::standard(g.nlevels(), with_sst);
    let mc = ModelConfig {
        num_blocks: 1,
        latent_dim: 4,
        ..ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation)
    };
    let mut params = ModelParams::init(mc, 1).unwrap();
    // Small weights keep an untrained model's tendencies tame.
    params.tensors.iter_mut().for_each(|t| t.data.iter_mut().for_each(|v| *v *= 0.05));
    let ck = Checkpoint::new(params, g, layout, stats).unwrap();
    (Emulator::new(ck).unwrap(), data)
}

#[test]
fn horizon_zero_records_only_the_initial_state() {
    let (em, data) = small_setup(1, false);
    let forcings = ForcingSeries::from_container(&data, lucie3d::forcing::SOLAR_CONSTANT).unwrap();
    let init = initial_state(InitMode::State(5), &data, em.layout(), None).unwrap();
    let config = RolloutConfig { horizon: 0, ..Default::default() };
    let traj = rollout_to_container(&em, &init, &forcings, &config).unwrap();
    assert_eq!(traj.time_count(), 1);
    assert_eq!(traj.header.time_start, data.header.time(5));
    let np = data.header.npoints();
    assert_eq!(&traj.step(0)[..33 * np], &init.prognostic[..]);
}

#[test]
fn stationary_co2_repeats_after_one_year_and_rollouts_are_deterministic() {
    let (em, data) = small_setup(2, false);
    let forcings = ForcingSeries::from_container(&data, lucie3d::forcing::SOLAR_CONSTANT).unwrap();
    let init = initial_state(InitMode::State(0), &data, em.layout(), None).unwrap();
    let config = RolloutConfig {
        horizon: STEPS_PER_YEAR + 40,
        co2_mode: Co2Mode::Stationary(0),
        stride: 4,
        ..Default::default()
    };
    let a = rollout_to_container(&em, &init, &forcings, &config).unwrap();
    let b = rollout_to_container(&em, &init, &forcings, &config).unwrap();
    assert_eq!(a, b);
    let per_year = STEPS_PER_YEAR / 4;
    for t in 0..10 {
        assert_eq!(a.field(t, layout::CO2, 0).unwrap(), a.field(t + per_year, layout::CO2, 0).unwrap());
    }
    assert!(a.data.iter().all(|v| v.is_finite()));
}

#[test]
fn sst_modes_shift_only_the_ocean() {
    let (em, data) = small_setup(1, true);
    let forcings = ForcingSeries::from_container(&data, lucie3d::forcing::SOLAR_CONSTANT).unwrap();
    let g = em.grid().clone();
    let t = data.header.time(3);
    let obs = forcings.sst_at(SstMode::Observed, t, DEFAULT_KERNEL_SIGMA, &g).unwrap().unwrap();
    let biased = forcings.sst_at(SstMode::Biased(4.0), t, DEFAULT_KERNEL_SIGMA, &g).unwrap().unwrap();
    let smoothed = forcings.sst_at(SstMode::BiasedSmoothed(4.0), t, DEFAULT_KERNEL_SIGMA, &g).unwrap().unwrap();
    for p in 0..g.npoints() {
        let land = forcings.land_sea_mask[p] >= 0.5;
        assert_eq!(biased[p] - obs[p], if land { 0.0 } else { 4.0 });
        if forcings.land_sea_mask[p] == 0.0 {
            assert_eq!(smoothed[p], biased[p]);
        }
    }
    assert!(forcings.sst_at(SstMode::None, t, DEFAULT_KERNEL_SIGMA, &g).unwrap().is_none());
    let init = initial_state(InitMode::State(0), &data, em.layout(), None).unwrap();
    let bad = RolloutConfig { horizon: 2, ..Default::default() };
    assert!(rollout_to_container(&em, &init, &forcings, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn smoothing_output_stays_within_input_range(seed in 0u64..1000, sigma in 0.5f64..3.0) {
        let (nlat, nlon) = (10, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask: Vec<f64> = (0..nlat * nlon).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
        let sst: Vec<f64> = (0..nlat * nlon).map(|_| rng.gen_range(260.0..310.0)).collect();
        let out = smooth_sst(&sst, &mask, nlat, nlon, sigma).unwrap();
        let lo = sst.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.field.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }
}

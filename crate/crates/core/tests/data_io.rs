mod common;

use common::{golden_container, golden_path, golden_value, GOLDEN_SHA256};
use lucie3d::data::synth::SyntheticClimate;
use lucie3d::data::{compute_norm_stats, compute_norm_stats_file, generate_synthetic_climate, read_container, write_container, ContainerHeader, FieldContainer, SynthConfig};
use lucie3d::diagnostics::trend::annual_trend;
use lucie3d::diagnostics::wk::{wheeler_kiladis, WkParams};
use lucie3d::experiment::sha256_hex;
use lucie3d::forcing::STEPS_PER_YEAR;
use lucie3d::layout::{Role, VarSpec};
use lucie3d::GridSpec;
use proptest::prelude::*;

#[test]
#[ignore = "rewrites the committed fixture"]
fn regenerate_golden_fixture() {
    write_container(golden_path(), &golden_container()).unwrap();
    println!("{}", sha256_hex(&std::fs::read(golden_path()).unwrap()));
}

#[test]
fn golden_fixture_parses_bit_identically() {
    let bytes = std::fs::read(golden_path()).unwrap();
    assert_eq!(sha256_hex(&bytes), GOLDEN_SHA256);
    let c = FieldContainer::from_bytes(&bytes).unwrap();
    let h = &c.header;
    assert_eq!((h.nlat, h.nlon, h.truncation, h.time_count), (48, 96, 30, 3));
    assert_eq!((h.time_start, h.time_step), (86_400, 21_600));
    assert_eq!(h.sigma_levels, GridSpec::t30().unwrap().sigma_levels);
    assert_eq!(h.vars[1], VarSpec::new("CO2", 1, Role::Forcing));
    for t in 0..3 {
        for (v, name) in ["logP", "CO2"].iter().enumerate() {
            let f = c.field(t, name, 0).unwrap();
            for i in 0..48 {
                for j in 0..96 {
                    assert_eq!(f[i * 96 + j].to_bits(), golden_value(t, v, i, j).to_bits());
                }
            }
        }
    }
    assert_eq!(c.to_bytes(), bytes);
    assert_eq!(c, golden_container());
}

#[test]
fn streaming_stats_equal_in_memory_stats() {
    let dir = tempfile::tempdir().unwrap();
    let c = golden_container();
    let path = dir.path().join("g.luc3");
    write_container(&path, &c).unwrap();
    assert_eq!(compute_norm_stats_file(&path).unwrap(), compute_norm_stats(&c).unwrap());
    assert_eq!(read_container(&path).unwrap(), c);
}

#[test]
fn norm_stats_match_two_pass_oracle() {
    let g = GridSpec::t7().unwrap();
    let cfg = SynthConfig { years: 1, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    let mut header = data.header.clone();
    header.time_count = 200;
    let data = FieldContainer::from_parts(header, data.data[..200 * data.header.step_len()].to_vec()).unwrap();
    let stats = compute_norm_stats(&data).unwrap();
    let np = g.npoints();
    let fields = data.header.step_len() / np;
    assert_eq!(stats.channels.len(), fields);
    for (c, s) in stats.channels.iter().enumerate() {
        let values: Vec<f64> = (0..data.time_count()).flat_map(|t| data.step(t)[c * np..(c + 1) * np].to_vec()).collect();
        let diffs: Vec<f64> = (1..data.time_count())
            .flat_map(|t| {
                let (a, b) = (&data.step(t)[c * np..(c + 1) * np], &data.step(t - 1)[c * np..(c + 1) * np]);
                a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()
            })
            .collect();
        for (v, mean, std) in [(&values, s.mean, s.std), (&diffs, s.tend_mean, s.tend_std)] {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            let scale = m.abs().max(1.0);
            assert!((mean - m).abs() < 1e-12 * scale, "{}: mean {mean} vs {m}", s.name);
            assert!((std - sd).abs() < 1e-12 * scale.max(sd), "{}: std {std} vs {sd}", s.name);
        }
    }
}

#[test]
fn unforced_noise_free_years_repeat_exactly() {
    let g = GridSpec::t7().unwrap();
    let cfg = SynthConfig {
        years: 2,
        forcing_sensitivity: 0.0,
        noise_amplitude: 0.0,
        ..Default::default()
    };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    for t in (0..STEPS_PER_YEAR).step_by(97) {
        let (a, b) = (data.step(t), data.step(t + STEPS_PER_YEAR));
        // CO2 itself still ramps; every other field repeats.
        let (off, levels) = data.header.field_offset("CO2").unwrap();
        let np = g.npoints();
        for (idx, (x, y)) in a.iter().zip(b).enumerate() {
            if !(off..off + levels).contains(&(idx / np)) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "index {idx} differs: {x} vs {y}");
            }
        }
    }
}

#[test]
fn raw_dataset_has_planted_wave_and_analytic_trend() {
    let g = GridSpec::t15().unwrap();
    let cfg = SynthConfig { years: 1, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    let s = wheeler_kiladis(&data, "U", 4, &WkParams::default()).unwrap();
    let (k, f) = s.argmax(true);
    let bin = s.frequencies[1] - s.frequencies[0];
    assert_eq!(k, 3);
    assert!((f - 0.1).abs() <= 0.5 * bin, "peak at {f} cpd");

    let g7 = GridSpec::t7().unwrap();
    let quiet = SynthConfig { years: 4, noise_amplitude: 0.0, ..Default::default() };
    let data = generate_synthetic_climate(&quiet, &g7).unwrap();
    let fit = annual_trend(&data, "T", g7.nlevels() - 1, &g7).unwrap();
    let want = quiet.analytic_surface_trend();
    assert!((fit.slope - want).abs() < 0.02 * want, "{} vs {want}", fit.slope);
    let top = annual_trend(&data, "T", 0, &g7).unwrap();
    assert!(top.slope < 0.0);
}

#[test]
fn generator_streams_the_same_steps() {
    let g = GridSpec::t7().unwrap();
    let cfg = SynthConfig { years: 1, seed: 3, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &g).unwrap();
    let mut gen = SyntheticClimate::new(cfg, &g).unwrap();
    for t in 0..20 {
        assert_eq!(gen.next_step().unwrap(), data.step(t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn container_round_trips_any_payload(
        steps in 0usize..4,
        levels in 1usize..4,
        start in -1_000_000i64..1_000_000,
        seed in any::<u64>(),
    ) {
        let g = GridSpec::t7().unwrap();
        let vars = vec![VarSpec::new("A", levels, Role::Prognostic), VarSpec::new("b_2", 1, Role::Static)];
        let header = ContainerHeader::new(&g, start, 21_600, vars).unwrap();
        let mut c = FieldContainer::new(header).unwrap();
        let len = c.header.step_len();
        let mut x = seed;
        for _ in 0..steps {
            let step: Vec<f64> = (0..len).map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits((x >> 2) | 0x3000_0000_0000_0000) - 1.0
            }).collect();
            c.push_step(&step).unwrap();
        }
        let bytes = c.to_bytes();
        let back = FieldContainer::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back, c);
    }
}

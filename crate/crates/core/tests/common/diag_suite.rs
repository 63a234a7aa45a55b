use std::f64::consts::PI;

use lucie3d::diagnostics::eof::eof_from_series;
use lucie3d::diagnostics::wk::wk_from_series;
use lucie3d::diagnostics::*;
use lucie3d::forcing::{MONTH_SECONDS, YEAR_SECONDS};
use lucie3d::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn ols_oracle(x: &[f64], y: &[f64]) -> (f64, f64) {
    // Cramer's rule on the 2x2 normal equations.
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

pub fn wave_series(g: &GridSpec, steps: usize, waves: &[(i32, f64, bool, f64)]) -> Vec<Vec<f64>> {
    let lats = g.latitudes();
    let lons = g.longitudes();
    (0..steps)
        .map(|t| {
            let days = t as f64 * 0.25;
            let mut f = vec![0.0; g.npoints()];
            for &(k, period, sym, amp) in waves {
                for (i, &phi) in lats.iter().enumerate() {
                    let y = phi / 20f64.to_radians();
                    let m = if sym { (-y * y).exp() } else { y * (-y * y).exp() };
                    for (j, &lam) in lons.iter().enumerate() {
                        f[i * g.nlon + j] += amp * m * (k as f64 * lam - 2.0 * PI * days / period).cos();
                    }
                }
            }
            f
        })
        .collect()
}

pub fn spectrum(g: &GridSpec, series: &[Vec<f64>]) -> WkSpectrum {
    let refs: Vec<&[f64]> = series.iter().map(|v| v.as_slice()).collect();
    wk_from_series(&refs, &g.latitudes_deg(), g.nlon, 4, &WkParams::default()).unwrap()
}

pub fn nearest_bin(s: &WkSpectrum, f: f64) -> f64 {
    *s.frequencies.iter().min_by(|a, b| (*a - f).abs().total_cmp(&(*b - f).abs())).unwrap()
}

pub fn djf_times(seasons: usize, per_month: usize) -> Vec<i64> {
    let mut out = Vec::new();
    for y in 0..seasons as i64 {
        for m in [11i64, 12, 13] {
            for k in 0..per_month as i64 {
                out.push(y * YEAR_SECONDS + m * MONTH_SECONDS + k * (MONTH_SECONDS / per_month as i64));
            }
        }
    }
    out
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn doy(n: usize, start: usize) -> Vec<usize> {
    (0..n).map(|d| (start + d) % 360).collect()
}

pub fn trend_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..200).map(|i| 0.3 * i as f64 / 50.0 + 1.7 + 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
    let step = YEAR_SECONDS as f64 / 5.0;
    let f = fit_trend(&y, step).unwrap();
    let x: Vec<f64> = (0..200).map(|i| i as f64 / 50.0).collect();
    let (b, a) = ols_oracle(&x, &y);
    assert!((f.slope - b).abs() < 1e-12 * b.abs().max(1.0));
    assert!((f.intercept - a).abs() < 1e-12 * a.abs().max(1.0));
    // Normal equations hold at the fitted coefficients.
    let r: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| yi - f.intercept - f.slope * xi).collect();
    assert!(r.iter().sum::<f64>().abs() < 1e-10);
    assert!(r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-10);
}

pub fn wk_planted_eastward_and_westward() {
    let g = GridSpec::t15().unwrap();
    let east = spectrum(&g, &wave_series(&g, 4 * 200, &[(3, 10.0, true, 1.0)]));
    let (k, f) = east.argmax(true);
    assert_eq!(k, 3);
    assert_eq!(f, nearest_bin(&east, 0.1));
    assert!((f - 0.1).abs() <= 0.5 * east.frequencies[1]);
    let west = spectrum(&g, &wave_series(&g, 4 * 200, &[(-3, 10.0, true, 1.0)]));
    assert_eq!(west.argmax(true), (-3, f));
}

pub fn eof_recovers_planted_mode() {
    let g = GridSpec::t7().unwrap();
    let times = djf_times(3, 10);
    let lats = g.latitudes_deg();
    let p: Vec<f64> = (0..g.npoints()).map(|q| ((q % g.nlon) as f64 * 0.7).cos() + lats[q / g.nlon] / 30.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let series: Vec<Vec<f64>> = times.iter().map(|_| {
        let a: f64 = StandardNormal.sample(&mut rng);
        p.iter().map(|v| a * v).collect()
    }).collect();
    let refs: Vec<&[f64]> = series.iter().map(|v| v.as_slice()).collect();
    let e = eof_from_series(&refs, &times, &lats, g.nlon, &EofParams::djf(Hemisphere::North)).unwrap();
    let planted: Vec<f64> = e.rows.iter().flat_map(|&i| p[i * g.nlon..(i + 1) * g.nlon].iter().copied()).collect();
    assert!((corr(&e.pattern, &planted).abs() - 1.0).abs() < 1e-10);
    assert!((e.explained_variance - 1.0).abs() < 1e-10);
    assert!((e.explained_all.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let norm: f64 = e
        .pattern
        .iter()
        .enumerate()
        .map(|(q, v)| v * v * lats[e.rows[q / g.nlon]].to_radians().cos())
        .sum();
    assert!((norm - 1.0).abs() < 1e-10);
    // Flipping the anomalies leaves the reported pattern unchanged.
    let neg: Vec<Vec<f64>> = series.iter().map(|f| f.iter().map(|v| -v).collect()).collect();
    let refs: Vec<&[f64]> = neg.iter().map(|v| v.as_slice()).collect();
    let e2 = eof_from_series(&refs, &times, &lats, g.nlon, &EofParams::djf(Hemisphere::North)).unwrap();
    for (a, b) in e.pattern.iter().zip(&e2.pattern) {
        assert!((a - b).abs() < 1e-9);
    }
}

pub fn eof_variance_ratio_four_to_one() {
    let g = GridSpec::t7().unwrap();
    let lats = g.latitudes_deg();
    let times = djf_times(2, 30);
    let n = times.len();
    let params = EofParams::djf(Hemisphere::South);
    let rows: Vec<usize> = (0..g.nlat).filter(|&i| lats[i] <= -20.0).collect();
    // Two orthonormal weighted patterns (zonal wavenumbers 1 and 2) with
    // orthogonal, zero-mean-per-month time series of variance ratio 4:1.
    let mut series = vec![vec![0.0; g.npoints()]; n];
    for (t, f) in series.iter_mut().enumerate() {
        let a = 2.0 * (2.0 * PI * t as f64 / 30.0).cos();
        let b = (2.0 * PI * t as f64 / 15.0).sin();
        for &i in &rows {
            let w = lats[i].to_radians().cos().sqrt();
            for j in 0..g.nlon {
                let lam = 2.0 * PI * j as f64 / g.nlon as f64;
                f[i * g.nlon + j] = (a * lam.cos() + b * (2.0 * lam).cos()) / w;
            }
        }
    }
    let refs: Vec<&[f64]> = series.iter().map(|v| v.as_slice()).collect();
    let e = eof_from_series(&refs, &times, &lats, g.nlon, &params).unwrap();
    assert!((e.explained_variance - 0.8).abs() < 1e-10, "{}", e.explained_variance);
    assert!((e.explained_all.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!(!e.degenerate);
}

pub fn ssw_constructed_reversal() {
    // Start on 1 December; westerlies for 30 days, easterlies for 8, then back.
    let n = 120;
    let days = doy(n, 330);
    let mut wind = vec![10.0; n];
    wind[30..38].iter_mut().for_each(|v| *v = -5.0);
    let mut temp = vec![200.0; n];
    temp[33] = 230.0;
    let ev = detect_ssw(&wind, &temp, &days, None, &SswParams::default());
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].onset_day, 30);
    assert_eq!(ev[0].duration_days, 8);
    assert!(ev[0].peak_temperature_anomaly > 29.0);
    // Too few prior westerly days, a one-day blip, and a summer reversal do not count.
    let mut w2 = vec![10.0; n];
    w2[10..15].iter_mut().for_each(|v| *v = -5.0);
    w2[40] = -1.0;
    assert!(detect_ssw(&w2, &temp, &days, None, &SswParams::default()).is_empty());
    let summer = doy(n, 150);
    assert!(detect_ssw(&wind, &temp, &summer, None, &SswParams::default()).is_empty());
}

use std::f64::consts::PI;

use lucie3d::grid::{build_grid, gauss_legendre};
use lucie3d::sht::{coeff_pairs, quadrature_mean, SpectralCoeffs, Sht};
use lucie3d::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// P_n(x) by the Bonnet recurrence, written independently of the library.
pub fn legendre(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = ((2 * k + 1) as f64 * x * b - k as f64 * a) / (k + 1) as f64;
        a = b;
        b = c;
    }
    b
}

pub fn bisect_roots(n: usize) -> Vec<f64> {
    let steps = 40 * n;
    let mut roots = Vec::new();
    for s in 0..steps {
        let (mut lo, mut hi) = (-1.0 + 2.0 * s as f64 / steps as f64, -1.0 + 2.0 * (s + 1) as f64 / steps as f64);
        let (flo, fhi) = (legendre(n, lo), legendre(n, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if legendre(n, lo) * legendre(n, mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

pub fn p48_nodes_and_weights_match_bisection_oracle() {
    let n = 48;
    let (nodes, weights) = gauss_legendre(n).unwrap();
    let roots = bisect_roots(n);
    assert_eq!(roots.len(), n);
    for i in 0..n {
        assert!((nodes[i] - roots[i]).abs() < 1e-13, "node {i}: {} vs {}", nodes[i], roots[i]);
        // Independent weight formula: 2 (1 - x²) / (n P_{n-1}(x))².
        let x = roots[i];
        let p = legendre(n - 1, x);
        let w = 2.0 * (1.0 - x * x) / (n as f64 * p).powi(2);
        assert!((weights[i] - w).abs() < 1e-13, "weight {i}");
        assert_eq!(nodes[i], -nodes[n - 1 - i]);
    }
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, truncation: usize) -> SpectralCoeffs {
    let mut c = SpectralCoeffs::zeros(truncation);
    for (l, m) in coeff_pairs(truncation) {
        let im = if m == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
        c.set(l, m, Complex64::new(rng.gen_range(-1.0..1.0), im));
    }
    c
}

/// Σ |a_lm|² over all orders, negative orders implied by symmetry.
pub fn direct_energy(c: &SpectralCoeffs) -> f64 {
    coeff_pairs(c.truncation)
        .into_iter()
        .map(|(l, m)| c.get(l, m).norm_sqr() * if m == 0 { 1.0 } else { 2.0 })
        .sum()
}

pub fn round_trip_and_parseval(grid: &GridSpec, seed: u64) {
    let sht = Sht::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let c = random_coeffs(&mut rng, grid.truncation);
        let f = sht.inverse(&c).unwrap();
        let back = sht.forward(&f).unwrap();
        let err = c.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "coefficient round trip error {err:e}");
        let f2 = sht.inverse(&back).unwrap();
        let err = f.iter().zip(&f2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "grid round trip error {err:e}");

        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let grid_energy = 4.0 * PI * quadrature_mean(&sq, grid).unwrap();
        let spec = direct_energy(&c);
        assert!((grid_energy - spec).abs() < 1e-10 * spec.max(1.0), "{grid_energy} vs {spec}");
    }
}

pub fn round_trip_and_parseval_t15() {
    round_trip_and_parseval(&GridSpec::t15().unwrap(), 15);
}

pub fn round_trip_and_parseval_t30() {
    round_trip_and_parseval(&GridSpec::t30().unwrap(), 30);
}

pub fn quadrature_exact_to_degree_2n_minus_1() {
    for grid in [GridSpec::t15().unwrap(), GridSpec::t30().unwrap()] {
        let n = grid.nlat;
        for k in 0..2 * n {
            let q: f64 = grid.gauss_nodes.iter().zip(&grid.gauss_weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-12, "n={n} k={k}: {q} vs {exact}");
        }
    }
}

pub fn known_low_degree_harmonics() {
    let grid = GridSpec::t15().unwrap();
    let sht = Sht::new(&grid);
    let lons = grid.longitudes();
    let mut f10 = vec![0.0; grid.npoints()];
    let mut f11 = vec![0.0; grid.npoints()];
    for (i, &mu) in grid.gauss_nodes.iter().enumerate() {
        let cos_lat = (1.0 - mu * mu).sqrt();
        for (j, &lam) in lons.iter().enumerate() {
            f10[i * grid.nlon + j] = (3.0 / (4.0 * PI)).sqrt() * mu;
            // 2 Re(Y_11) without the Condon-Shortley phase.
            f11[i * grid.nlon + j] = 2.0 * (3.0 / (8.0 * PI)).sqrt() * cos_lat * lam.cos();
        }
    }
    for (f, (l, m)) in [(f10, (1, 0)), (f11, (1, 1))] {
        let c = sht.forward(&f).unwrap();
        for (ll, mm) in coeff_pairs(grid.truncation) {
            let want = if (ll, mm) == (l, m) { 1.0 } else { 0.0 };
            let got = c.get(ll, mm);
            assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12, "({ll},{mm}) = {got}");
        }
    }
}

pub fn global_mean_is_scaled_y00() {
    let grid = build_grid(10, 16, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_coeffs(&mut rng, grid.truncation);
    let f = Sht::new(&grid).inverse(&c).unwrap();
    let mean = quadrature_mean(&f, &grid).unwrap();
    assert!((mean * (4.0 * PI).sqrt() - c.get(0, 0).re).abs() < 1e-12);
}


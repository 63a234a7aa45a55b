//! Round-trip a band-limited random field through the spherical harmonic
//! transform and check Parseval's identity.

use lucie3d::grid::build_grid;
use lucie3d::sht::{coeff_pairs, quadrature_mean, SpectralCoeffs, Sht};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

fn main() -> lucie3d::Result<()> {
    let grid = build_grid(15, 24, 48)?;
    let sht = Sht::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut c = SpectralCoeffs::zeros(grid.truncation);
    for (l, m) in coeff_pairs(grid.truncation) {
        let im = if m == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
        c.set(l, m, Complex64::new(rng.gen_range(-1.0..1.0), im));
    }
    let field = sht.inverse(&c)?;
    let back = sht.forward(&field)?;
    let err = c.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("T{} on {}x{}: round-trip max error {err:.2e}", grid.truncation, grid.nlat, grid.nlon);

    let sq: Vec<f64> = field.iter().map(|v| v * v).collect();
    let grid_energy = 4.0 * std::f64::consts::PI * quadrature_mean(&sq, &grid)?;
    println!("grid energy {grid_energy:.12} spectral energy {:.12}", c.energy());
    Ok(())
}

//! Bias prescribed SST over the ocean and blend it into land points with a
//! mask-normalized Gaussian, as used by the biased-SST experiments.

use lucie3d::data::{generate_synthetic_climate, SynthConfig};
use lucie3d::rollout::{smooth_sst, ForcingSeries, SstMode, DEFAULT_KERNEL_SIGMA};
use lucie3d::forcing::SOLAR_CONSTANT;
use lucie3d::GridSpec;

fn main() -> lucie3d::Result<()> {
    let grid = GridSpec::t7()?;
    let cfg = SynthConfig { years: 1, with_sst: true, noise_amplitude: 0.0, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &grid)?;
    let forcings = ForcingSeries::from_container(&data, SOLAR_CONSTANT)?;
    let t = data.header.time(0);
    let raw = forcings.sst_at(SstMode::Observed, t, DEFAULT_KERNEL_SIGMA, &grid)?.expect("sst");
    let biased = forcings.sst_at(SstMode::Biased(2.0), t, DEFAULT_KERNEL_SIGMA, &grid)?.expect("sst");
    let smoothed = smooth_sst(&biased, &forcings.land_sea_mask, grid.nlat, grid.nlon, DEFAULT_KERNEL_SIGMA)?;

    let row = grid.nlat / 2;
    println!("{:>4} {:>5} {:>9} {:>9} {:>9}", "lon", "lsm", "observed", "biased", "smoothed");
    for j in 0..grid.nlon {
        let p = row * grid.nlon + j;
        println!("{j:>4} {:>5.2} {:>9.3} {:>9.3} {:>9.3}", forcings.land_sea_mask[p], raw[p], biased[p], smoothed.field[p]);
    }
    Ok(())
}

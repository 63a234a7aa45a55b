//! Generate a small synthetic climate, write it to disk, read it back and
//! print normalization statistics for a few channels.

use lucie3d::data::{compute_norm_stats, generate_synthetic_climate, read_container, write_container, SynthConfig};
use lucie3d::GridSpec;

fn main() -> lucie3d::Result<()> {
    let grid = GridSpec::t7()?;
    let cfg = SynthConfig { years: 1, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &grid)?;
    let dir = std::env::temp_dir().join("lucie3d-synth-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("synth.luc3");
    write_container(&path, &data)?;
    let back = read_container(&path)?;
    assert_eq!(back, data);
    println!("{} steps of {} variables on {}x{}", back.time_count(), back.header.vars.len(), grid.nlat, grid.nlon);

    let stats = compute_norm_stats(&back)?;
    for name in ["T@7", "T@0", "U@3", "logP", "TP", "CO2"] {
        let s = stats.get(name)?;
        println!("{name:>5}: mean {:10.4} std {:8.4} tendency std {:8.4}", s.mean, s.std, s.tend_std);
    }
    println!("analytic surface trend {:.3} K/decade", cfg.analytic_surface_trend());
    Ok(())
}

//! Run the diagnostics battery on raw synthetic data: space-time spectrum,
//! annular-mode EOF, stratospheric warming detector, precipitation PDF and
//! trend, writing report tables to a temporary directory.

use lucie3d::data::{generate_synthetic_climate, SynthConfig};
use lucie3d::diagnostics::report::{eof_tables, pdf_table, ssw_tables, trend_table, wk_table};
use lucie3d::diagnostics::*;
use lucie3d::grid::build_grid;

fn main() -> lucie3d::Result<()> {
    let grid = build_grid(15, 24, 48)?;
    let cfg = SynthConfig { years: 2, ..Default::default() };
    let data = generate_synthetic_climate(&cfg, &grid)?;
    let out = std::env::temp_dir().join("lucie3d-diagnostics");
    std::fs::create_dir_all(&out)?;
    let surface = grid.nlevels() - 1;

    let wk = wheeler_kiladis(&data, "U", surface, &WkParams::default())?;
    let (k, f) = wk.argmax(true);
    println!("symmetric spectrum peak: k = {k}, {f:.3} cycles/day over {} segments", wk.segments);
    wk_table(&wk).save(out.join("wk.txt"))?;

    let eof = leading_eof(&data, "logP", 0, &EofParams::djf(Hemisphere::North))?;
    println!("leading northern EOF explains {:.1}% of variance", 100.0 * eof.explained_variance);
    let lons: Vec<f64> = grid.longitudes().iter().map(|l| l.to_degrees()).collect();
    let (pattern, _) = eof_tables(&eof, &grid.latitudes_deg(), &lons);
    pattern.save(out.join("eof_pattern.txt"))?;

    let ssw = ssw_diagnostics(&data, &SswParams::default())?;
    println!("{} sudden warming events", ssw.events.len());
    ssw_tables(&ssw).1.save(out.join("ssw_events.txt"))?;

    let tp: Vec<f64> = field_series(&data, "TP", 0)?.concat();
    let edges = shared_edges(&[&tp], 40)?;
    let pdf = log_pdf(&data, "TP", 0, &edges)?;
    pdf_table("log-pdf", &[("synthetic", &pdf)]).save(out.join("pdf_tp.txt"))?;

    let trend = annual_trend(&data, "T", surface, &grid)?;
    println!("surface trend {:+.3} K/decade (analytic {:+.3})", trend.slope, cfg.analytic_surface_trend());
    trend_table(&[trend]).save(out.join("trend.txt"))?;
    println!("tables in {}", out.display());
    Ok(())
}

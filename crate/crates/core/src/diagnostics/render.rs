//! Minimal heat-map renderer: reads a report table and writes a binary PPM.

use std::path::Path;

use crate::diagnostics::report::ReportTable;
use crate::error::{Error, Result};

/// Cell grid of a table: unique sorted `x` and `y` values and the matching values.
pub struct Raster {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `[y][x]`; NaN where the table has no entry.
    pub values: Vec<f64>,
}

fn uniques(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

pub fn rasterize(table: &ReportTable, x: &str, y: &str, value: &str) -> Result<Raster> {
    let (cx, cy, cv) = (table.column(x)?, table.column(y)?, table.column(value)?);
    let xs = uniques(&cx);
    let ys = uniques(&cy);
    let mut values = vec![f64::NAN; xs.len() * ys.len()];
    for ((a, b), v) in cx.iter().zip(&cy).zip(&cv) {
        let i = xs.partition_point(|p| p < a);
        let j = ys.partition_point(|p| p < b);
        values[j * xs.len() + i] = *v;
    }
    Ok(Raster { xs, ys, values })
}

/// Diverging blue-white-red when values change sign, white-to-red otherwise.
fn colour(v: f64, lo: f64, hi: f64) -> [u8; 3] {
    if !v.is_finite() {
        return [128, 128, 128];
    }
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t.clamp(0.0, 1.0)).round() as u8;
    if lo < 0.0 && hi > 0.0 {
        let m = lo.abs().max(hi);
        let t = v / m;
        if t < 0.0 {
            [lerp(255.0, 40.0, -t), lerp(255.0, 60.0, -t), 255]
        } else {
            [255, lerp(255.0, 60.0, t), lerp(255.0, 40.0, t)]
        }
    } else {
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        [255, lerp(255.0, 30.0, t), lerp(255.0, 0.0, t)]
    }
}

/// Encodes a raster as binary PPM with each cell drawn as `cell x cell`
/// pixels; the largest `y` is at the top.
pub fn raster_to_ppm(r: &Raster, cell: usize) -> Result<Vec<u8>> {
    if r.xs.is_empty() || r.ys.is_empty() || cell == 0 {
        return Err(Error::Invalid("empty raster".into()));
    }
    let finite = r.values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (r.xs.len() * cell, r.ys.len() * cell);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for py in 0..h {
        let j = r.ys.len() - 1 - py / cell;
        for px in 0..w {
            out.extend_from_slice(&colour(r.values[j * r.xs.len() + px / cell], lo, hi));
        }
    }
    Ok(out)
}

/// Renders columns `x`, `y`, `value` of a saved table to a PPM file.
pub fn render_table(table: &ReportTable, x: &str, y: &str, value: &str, path: impl AsRef<Path>) -> Result<()> {
    let r = rasterize(table, x, y, value)?;
    std::fs::write(path, raster_to_ppm(&r, 8)?)?;
    Ok(())
}

//! Zonal-mean climatologies, model bias and climate-change maps.

use std::ops::Range;

use crate::data::container::FieldContainer;
use crate::diagnostics::levels_of;
use crate::error::{Error, Result};

/// A `[level][lat]` field of zonal means.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalMap {
    pub var: String,
    pub levels: usize,
    pub nlat: usize,
    pub values: Vec<f64>,
    /// Reference climatology drawn as contours alongside a bias map.
    pub reference: Option<Vec<f64>>,
}

impl ZonalMap {
    pub fn at(&self, level: usize, lat: usize) -> f64 {
        self.values[level * self.nlat + lat]
    }
}

/// Time and zonal mean of `var` over the steps in `span`.
pub fn zonal_time_mean(traj: &FieldContainer, var: &str, span: Range<usize>) -> Result<Vec<f64>> {
    if span.start >= span.end || span.end > traj.time_count() {
        return Err(Error::OutOfRange(format!("time span {span:?} of {} steps", traj.time_count())));
    }
    let levels = levels_of(traj, var)?;
    let (nlat, nlon) = (traj.header.nlat, traj.header.nlon);
    let mut out = vec![0.0; levels * nlat];
    for t in span.clone() {
        let f = traj.var(t, var)?;
        for k in 0..levels {
            for i in 0..nlat {
                let row = &f[(k * nlat + i) * nlon..(k * nlat + i + 1) * nlon];
                out[k * nlat + i] += row.iter().sum::<f64>();
            }
        }
    }
    let n = (span.len() * nlon) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Zonal-mean time-mean bias of `model` against `reference` over their
/// common time axis.
pub fn climatology_bias(model: &FieldContainer, reference: &FieldContainer, var: &str) -> Result<ZonalMap> {
    let (m, r) = (&model.header, &reference.header);
    if (m.nlat, m.nlon) != (r.nlat, r.nlon) {
        return Err(Error::Invalid("model and reference grids differ".into()));
    }
    if (m.time_start, m.time_step, model.time_count()) != (r.time_start, r.time_step, reference.time_count()) {
        return Err(Error::Invalid(format!(
            "time span mismatch: model {}+{}x{}, reference {}+{}x{}",
            m.time_start,
            m.time_step,
            model.time_count(),
            r.time_start,
            r.time_step,
            reference.time_count()
        )));
    }
    let levels = levels_of(model, var)?;
    if levels_of(reference, var)? != levels {
        return Err(Error::Invalid(format!("{var} level counts differ")));
    }
    let n = model.time_count();
    let clim_m = zonal_time_mean(model, var, 0..n)?;
    let clim_r = zonal_time_mean(reference, var, 0..n)?;
    Ok(ZonalMap {
        var: var.to_string(),
        levels,
        nlat: m.nlat,
        values: clim_m.iter().zip(&clim_r).map(|(a, b)| a - b).collect(),
        reference: Some(clim_r),
    })
}

/// Zonal-time mean over `late` minus that over `early`. Identical spans give
/// a zero map; partially overlapping spans are rejected.
pub fn climate_change_map(traj: &FieldContainer, var: &str, early: Range<usize>, late: Range<usize>) -> Result<ZonalMap> {
    let overlap = early.start < late.end && late.start < early.end;
    if overlap && early != late {
        return Err(Error::Invalid(format!("spans {early:?} and {late:?} overlap")));
    }
    let a = zonal_time_mean(traj, var, early)?;
    let b = zonal_time_mean(traj, var, late)?;
    Ok(ZonalMap {
        var: var.to_string(),
        levels: levels_of(traj, var)?,
        nlat: traj.header.nlat,
        values: b.iter().zip(&a).map(|(l, e)| l - e).collect(),
        reference: None,
    })
}

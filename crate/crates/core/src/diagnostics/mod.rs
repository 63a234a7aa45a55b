//! Analyses of trajectories and datasets: zonal climatologies, climate-change
//! maps, trend fits, space-time spectra, annular modes, stratospheric
//! warmings and distribution tails.
//!
//! Every function reads a [`FieldContainer`] (model trajectory or dataset)
//! and is pure.

pub mod clim;
pub mod eof;
pub mod pdf;
pub mod render;
pub mod report;
pub mod ssw;
pub mod trend;
pub mod wk;

pub use clim::{climate_change_map, climatology_bias, zonal_time_mean, ZonalMap};
pub use eof::{leading_eof, EofParams, EofResult, Hemisphere};
pub use pdf::{log_pdf, shared_edges, weighted_log_pdf, LogPdf};
pub use report::{ReportTable, REPORT_VERSION};
pub use ssw::{detect_ssw, ssw_diagnostics, SswEvent, SswParams, SswReport};
pub use trend::{annual_means, annual_trend, fit_trend, fit_trend_xy, global_mean_series, TrendFit};
pub use wk::{wheeler_kiladis, WkParams, WkSpectrum};

use crate::data::container::FieldContainer;
use crate::error::{Error, Result};
use crate::forcing::DAY_SECONDS;

/// All time slices of one variable level.
pub fn field_series<'a>(traj: &'a FieldContainer, var: &str, level: usize) -> Result<Vec<&'a [f64]>> {
    (0..traj.time_count()).map(|t| traj.field(t, var, level)).collect()
}

/// Stored steps per day; 1 when steps are a day or longer.
pub fn steps_per_day(traj: &FieldContainer) -> Result<usize> {
    let dt = traj.header.time_step;
    if dt <= 0 {
        return Err(Error::Invalid("non-positive time step".into()));
    }
    if dt >= DAY_SECONDS {
        return Ok(1);
    }
    if DAY_SECONDS % dt != 0 {
        return Err(Error::Invalid(format!("time step {dt} s does not divide a day")));
    }
    Ok((DAY_SECONDS / dt) as usize)
}

/// Level count of a variable in a container.
pub fn levels_of(traj: &FieldContainer, var: &str) -> Result<usize> {
    Ok(traj.header.field_offset(var)?.1)
}

/// Reference steps at exactly the model's time stamps, as a new container.
pub fn align_reference(model: &FieldContainer, reference: &FieldContainer) -> Result<FieldContainer> {
    let (rh, mh) = (&reference.header, &model.header);
    if (rh.nlat, rh.nlon) != (mh.nlat, mh.nlon) {
        return Err(Error::Invalid("model and reference grids differ".into()));
    }
    let mut header = rh.clone();
    header.time_start = mh.time_start;
    header.time_step = mh.time_step;
    header.time_count = 0;
    let mut out = FieldContainer::new(header)?;
    for t in 0..model.time_count() {
        let rel = mh.time(t) - rh.time_start;
        if rel < 0 || rel % rh.time_step != 0 || (rel / rh.time_step) as usize >= reference.time_count() {
            return Err(Error::Invalid(format!("reference does not cover model time {}", mh.time(t))));
        }
        out.push_step(reference.step((rel / rh.time_step) as usize))?;
    }
    Ok(out)
}

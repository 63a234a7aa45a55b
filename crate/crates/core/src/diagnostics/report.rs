//! Self-describing text tables for every diagnostic.
//!
//! ```text
//! # lucie3d-report 1
//! # kind <kind>
//! # columns <name> <name> ...
//! <value> <value> ...
//! ```
//!
//! Numbers use the shortest round-trip form, so tables parse back exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::clim::ZonalMap;
use crate::diagnostics::eof::EofResult;
use crate::diagnostics::pdf::LogPdf;
use crate::diagnostics::ssw::SswReport;
use crate::diagnostics::trend::TrendFit;
use crate::diagnostics::wk::{kelvin_frequency, WkSpectrum, EQUIVALENT_DEPTHS};
use crate::error::{Error, Result};

pub const REPORT_VERSION: u32 = 1;
const MAGIC: &str = "# lucie3d-report";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ReportTable {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .columns
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Missing(format!("report column {name}")))?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC} {REPORT_VERSION}\n# kind {}\n# columns {}\n", self.kind, self.columns.join(" "));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().unwrap_or_default();
        let version = head
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::Format("not a report table".into()))?;
        if version != REPORT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let kind = lines
            .next()
            .and_then(|l| l.strip_prefix("# kind "))
            .ok_or_else(|| Error::Format("missing kind line".into()))?
            .to_string();
        let columns: Vec<String> = lines
            .next()
            .and_then(|l| l.strip_prefix("# columns "))
            .ok_or_else(|| Error::Format("missing columns line".into()))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("row {}: bad number {v:?}", n + 1))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Format(format!("row {} has {} values, expected {}", n + 1, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { kind, columns, rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub fn zonal_map_table(kind: &str, map: &ZonalMap, sigma: &[f64], lats_deg: &[f64]) -> ReportTable {
    let cols: &[&str] = if map.reference.is_some() {
        &["level", "sigma", "lat", "value", "reference"]
    } else {
        &["level", "sigma", "lat", "value"]
    };
    let mut t = ReportTable::new(kind, cols);
    for k in 0..map.levels {
        for i in 0..map.nlat {
            let mut row = vec![k as f64, sigma.get(k).copied().unwrap_or(f64::NAN), lats_deg[i], map.at(k, i)];
            if let Some(r) = &map.reference {
                row.push(r[k * map.nlat + i]);
            }
            t.push(row);
        }
    }
    t
}

pub fn trend_table(fits: &[TrendFit]) -> ReportTable {
    let mut t = ReportTable::new("trend", &["index", "slope_per_decade", "intercept", "residual_variance", "n"]);
    for (i, f) in fits.iter().enumerate() {
        t.push(vec![i as f64, f.slope, f.intercept, f.residual_variance, f.n as f64]);
    }
    t
}

pub fn wk_table(s: &WkSpectrum) -> ReportTable {
    let norm_s = s.normalized(true);
    let norm_a = s.normalized(false);
    let mut cols = vec!["k", "freq_cpd", "symmetric", "antisymmetric"];
    if s.background.is_some() {
        cols.extend(["background", "symmetric_norm", "antisymmetric_norm"]);
    }
    let mut t = ReportTable::new("wheeler-kiladis", &cols);
    let nf = s.frequencies.len();
    for (ki, &k) in s.wavenumbers.iter().enumerate() {
        for (fi, &f) in s.frequencies.iter().enumerate() {
            let i = ki * nf + fi;
            let mut row = vec![k as f64, f, s.symmetric[i], s.antisymmetric[i]];
            if let (Some(b), Some(ns), Some(na)) = (&s.background, &norm_s, &norm_a) {
                row.extend([b[i], ns[i], na[i]]);
            }
            t.push(row);
        }
    }
    t
}

/// Kelvin-wave dispersion curves for the reference equivalent depths.
pub fn dispersion_table(max_k: usize) -> ReportTable {
    let mut t = ReportTable::new("kelvin-dispersion", &["depth_m", "k", "freq_cpd"]);
    for h in EQUIVALENT_DEPTHS {
        for k in 0..=max_k {
            t.push(vec![h, k as f64, kelvin_frequency(h, k as f64)]);
        }
    }
    t
}

pub fn eof_tables(e: &EofResult, lats_deg: &[f64], lons_deg: &[f64]) -> (ReportTable, ReportTable) {
    let mut p = ReportTable::new("eof-pattern", &["lat", "lon", "loading"]);
    for (r, &row) in e.rows.iter().enumerate() {
        for j in 0..e.nlon {
            p.push(vec![lats_deg[row], lons_deg[j], e.pattern[r * e.nlon + j]]);
        }
    }
    let mut pc = ReportTable::new("eof-pc", &["step", "pc", "explained_variance"]);
    for (t, v) in e.times.iter().zip(&e.pcs) {
        pc.push(vec![*t as f64, *v, e.explained_variance]);
    }
    (p, pc)
}

pub fn ssw_tables(r: &SswReport) -> (ReportTable, ReportTable) {
    let mut d = ReportTable::new(
        "ssw-daily",
        &["day", "day_of_year", "wind", "temperature", "wind_clim", "wind_lo", "wind_hi", "temp_clim", "temp_lo", "temp_hi"],
    );
    for (i, &doy) in r.day_of_year.iter().enumerate() {
        let (wc, wl, wh) = r
            .wind_climatology
            .as_ref()
            .map(|c| {
                let (lo, hi) = c.envelope(doy);
                (c.mean[doy], lo, hi)
            })
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let (tc, tl, th) = r
            .temperature_climatology
            .as_ref()
            .map(|c| {
                let (lo, hi) = c.envelope(doy);
                (c.mean[doy], lo, hi)
            })
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        d.push(vec![i as f64, doy as f64, r.wind_index[i], r.temperature_index[i], wc, wl, wh, tc, tl, th]);
    }
    let mut e = ReportTable::new("ssw-events", &["onset_day", "duration_days", "peak_temperature_anomaly"]);
    for ev in &r.events {
        e.push(vec![ev.onset_day as f64, ev.duration_days as f64, ev.peak_temperature_anomaly]);
    }
    (d, e)
}

pub fn pdf_table(kind: &str, pdfs: &[(&str, &LogPdf)]) -> ReportTable {
    let mut cols = vec!["lo".to_string(), "hi".to_string()];
    cols.extend(pdfs.iter().map(|(n, _)| format!("log10_density_{n}")));
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = ReportTable::new(kind, &refs);
    if let Some((_, first)) = pdfs.first() {
        for (b, e) in first.edges.windows(2).enumerate() {
            let mut row = vec![e[0], e[1]];
            row.extend(pdfs.iter().map(|(_, p)| p.log_density[b]));
            t.push(row);
        }
    }
    t
}

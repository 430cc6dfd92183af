//! Plain-text columnar plot data.
//!
//! All files are tab-separated with a single header row, one set per series:
//!
//! - `<series>_autocovariance.tsv`: `lag`, `autocovariance` (normalized,
//!   smallest incremental lag).
//! - `<series>_bands_box.tsv`: `band`, `whisker_low`, `q1`, `median`, `q3`,
//!   `whisker_high`, `mean`, `std`, `window_fits` — one row per scale band.
//! - `<series>_<band>_fq.tsv`: `tau`, then one `F_q=<q>` column per moment
//!   order (raw values, ready for log-log axes).
//! - `<series>_km_drift.tsv`: `dx`, `d1`, `d2`, `count`, `usable` on the
//!   estimation grid at the drift fit lag.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::CliResult;
use crate::pipeline::write_atomic;
use crate::report::{AutocovarianceReport, FiveNumber};

#[derive(Debug, Clone)]
pub struct SeriesArtifacts {
    pub label: String,
    pub autocov: AutocovarianceReport,
    pub bands: Vec<BandArtifacts>,
    pub km_drift: Option<KmDriftTable>,
}

#[derive(Debug, Clone)]
pub struct BandArtifacts {
    pub name: String,
    pub snippet_sizes: Vec<usize>,
    pub q_orders: Vec<f64>,
    /// q-major fluctuation values.
    pub values: Vec<Vec<f64>>,
    pub five: FiveNumber,
    pub mean: f64,
    pub std: f64,
    pub window_fits: usize,
}

#[derive(Debug, Clone)]
pub struct KmDriftTable {
    pub lag: usize,
    pub dx: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub count: Vec<f64>,
    pub usable: Vec<bool>,
}

/// Emit every series' plot files into `out_dir`; returns the written paths.
pub fn emit_plotdata(artifacts: &[SeriesArtifacts], out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for series in artifacts {
        let slug = slugify(&series.label);

        let path = out_dir.join(format!("{slug}_autocovariance.tsv"));
        write_atomic(&path, autocov_table(&series.autocov).as_bytes())?;
        paths.push(path);

        let path = out_dir.join(format!("{slug}_bands_box.tsv"));
        write_atomic(&path, box_table(&series.bands).as_bytes())?;
        paths.push(path);

        for band in &series.bands {
            let path = out_dir.join(format!("{slug}_{}_fq.tsv", slugify(&band.name)));
            write_atomic(&path, surface_table(band).as_bytes())?;
            paths.push(path);
        }

        if let Some(drift) = &series.km_drift {
            let path = out_dir.join(format!("{slug}_km_drift.tsv"));
            write_atomic(&path, drift_table(drift).as_bytes())?;
            paths.push(path);
        }
    }
    Ok(paths)
}

pub fn autocov_table(autocov: &AutocovarianceReport) -> String {
    let mut out = String::from("lag\tautocovariance\n");
    for (lag, value) in autocov.lags.iter().zip(&autocov.values) {
        let _ = writeln!(out, "{lag}\t{value}");
    }
    out
}

pub fn box_table(bands: &[BandArtifacts]) -> String {
    let mut out =
        String::from("band\twhisker_low\tq1\tmedian\tq3\twhisker_high\tmean\tstd\twindow_fits\n");
    for b in bands {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            b.name,
            b.five.whisker_low,
            b.five.q1,
            b.five.median,
            b.five.q3,
            b.five.whisker_high,
            b.mean,
            b.std,
            b.window_fits
        );
    }
    out
}

pub fn surface_table(band: &BandArtifacts) -> String {
    let mut out = String::from("tau");
    for q in &band.q_orders {
        let _ = write!(out, "\tF_q={q}");
    }
    out.push('\n');
    for (ti, tau) in band.snippet_sizes.iter().enumerate() {
        let _ = write!(out, "{tau}");
        for qi in 0..band.q_orders.len() {
            let _ = write!(out, "\t{}", band.values[qi][ti]);
        }
        out.push('\n');
    }
    out
}

pub fn drift_table(drift: &KmDriftTable) -> String {
    let mut out = format!("# drift fit lag: {} samples\n", drift.lag);
    out.push_str("dx\td1\td2\tcount\tusable\n");
    for j in 0..drift.dx.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            drift.dx[j],
            drift.d1[j],
            drift.d2[j],
            drift.count[j],
            if drift.usable[j] { 1 } else { 0 }
        );
    }
    out
}

fn slugify(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

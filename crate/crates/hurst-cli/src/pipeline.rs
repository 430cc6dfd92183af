//! End-to-end orchestration: sources → increments → both estimators →
//! consolidated report and plot-data artifacts.
//!
//! A series enters the scale analysis in two shapes. The path form carries
//! the price-like levels whose increments are studied: the drift estimation
//! and the increment autocovariance work on it. The noise form is the
//! fluctuation signal itself (lag-1 increments of the path, or the raw
//! series when the source is already increment-like): the detrended
//! fluctuation analysis profiles it. Declaring a generator or CSV source as
//! `levels` or `increments` fixes the mapping; both estimators then see the
//! same underlying fluctuation process and report the same H.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;

use hurst_core::ingest::{load_csv, GapPolicy};
use hurst_core::km::{build_ensemble, estimate_km, hurst_from_drift, KmConfig};
use hurst_core::mfdfa::{analyze, hurst_distribution, HurstDistribution, MfdfaConfig};
use hurst_core::series::{autocovariance, make_increments, IncrementSeries, TimeSeries};
use hurst_core::synth::generate;

use crate::config::{AnalysisConfig, CliError, CliResult, SeriesConfig, SeriesForm, SourceConfig};
use crate::plotdata::{emit_plotdata, BandArtifacts, KmDriftTable, SeriesArtifacts};
use crate::report::{
    AutocovarianceReport, BandReport, FailureReport, FiveNumber, HurstReport, IngestSummary,
    Provenance, SeriesReport, DISCREPANCY_THRESHOLD,
};

#[derive(Debug)]
pub struct RunOutcome {
    pub report: HurstReport,
    pub report_path: PathBuf,
    pub artifact_paths: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.report.failures.len()
    }
}

/// Run every configured series, write `report.json` and the plot-data files
/// into `out_dir` (atomically), and return the consolidated report. Series
/// failures do not abort the run; they are collected in the report.
pub fn run_analysis(config: &AnalysisConfig, out_dir: &Path) -> CliResult<RunOutcome> {
    fs::create_dir_all(out_dir)?;

    let results: Vec<Result<(SeriesReport, SeriesArtifacts), FailureReport>> = config
        .series
        .par_iter()
        .map(|series| {
            process_series(series, config).map_err(|error| FailureReport {
                label: series.name.clone(),
                error: error.to_string(),
            })
        })
        .collect();

    let mut series_reports = Vec::new();
    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok((report, art)) => {
                series_reports.push(report);
                artifacts.push(art);
            }
            Err(failure) => failures.push(failure),
        }
    }

    let report = HurstReport {
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.config_hash.clone(),
            seeds: config.seeds.clone(),
            created_utc: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        },
        series: series_reports,
        failures,
    };

    let report_path = out_dir.join("report.json");
    write_atomic(&report_path, report.to_json()?.as_bytes())?;
    let artifact_paths = emit_plotdata(&artifacts, out_dir)?;

    Ok(RunOutcome {
        report,
        report_path,
        artifact_paths,
    })
}

fn process_series(
    series: &SeriesConfig,
    config: &AnalysisConfig,
) -> CliResult<(SeriesReport, SeriesArtifacts)> {
    let (raw, ingest) = match &series.source {
        SourceConfig::Csv {
            path,
            schema,
            max_fill,
        } => {
            let (ts, report) = load_csv(
                path,
                schema,
                GapPolicy {
                    max_fill: *max_fill,
                },
            )
            .map_err(analysis_err)?;
            (ts, Some(IngestSummary::from(&report)))
        }
        SourceConfig::Generator(spec) => (generate(spec).map_err(analysis_err)?, None),
    };
    let source_length = raw.len();

    // Path form: levels whose increments are analyzed. Noise form: the
    // fluctuation signal fed to the profile-based estimator.
    let (path_series, noise_series) = match series.form {
        SeriesForm::Levels => {
            let inc = make_increments(&raw, 1).map_err(analysis_err)?;
            let noise = TimeSeries::new(
                inc.values().to_vec(),
                raw.start_time(),
                raw.sample_interval(),
                format!("{} increments", series.name),
            )
            .map_err(analysis_err)?;
            (raw, noise)
        }
        SeriesForm::Increments => {
            let mut acc = 0.0;
            let path_values: Vec<f64> = raw
                .values()
                .iter()
                .map(|&v| {
                    acc += v;
                    acc
                })
                .collect();
            let path = raw
                .with_values(path_values, format!("{} path", series.name))
                .map_err(analysis_err)?;
            (path, raw)
        }
    };

    // Normalized autocovariance of the smallest-lag increments.
    let increment_sample = IncrementSeries::from_parts(
        noise_series.values().to_vec(),
        1,
        series.name.clone(),
        noise_series.sample_interval(),
    )
    .map_err(analysis_err)?;
    let max_lag = config
        .autocov_max_lag
        .min(increment_sample.len().saturating_sub(1) / 2)
        .max(1);
    let acov = autocovariance(&increment_sample, max_lag, true).map_err(analysis_err)?;
    let autocov_report = AutocovarianceReport {
        lags: (0..=max_lag).collect(),
        values: acov.values().to_vec(),
    };

    // Band-wise MFDFA with the band's detrending order.
    let mut band_reports = Vec::new();
    let mut band_artifacts = Vec::new();
    for band in &series.bands {
        let tau_lo = band.tau_min.max(band.detrend_order + 2);
        let tau_hi = band.tau_max.min(noise_series.len() / 4);
        let sizes: Vec<usize> = (tau_lo..=tau_hi).collect();
        if sizes.len() < config.mfdfa.min_window_points + 1 {
            return Err(CliError::Analysis(format!(
                "band '{}': series of length {} leaves {} snippet sizes in [{}, {}], \
                 need at least {}",
                band.name,
                noise_series.len(),
                sizes.len(),
                tau_lo,
                tau_hi,
                config.mfdfa.min_window_points + 1
            )));
        }
        let mfdfa_config = MfdfaConfig::new(
            sizes,
            config.mfdfa.q_orders.clone(),
            band.detrend_order,
            config.mfdfa.bidirectional,
        )
        .map_err(analysis_err)?;
        let surface = analyze(&noise_series, &mfdfa_config).map_err(analysis_err)?;
        let dist = hurst_distribution(
            &surface,
            (band.tau_min, band.tau_max),
            config.mfdfa.min_window_points,
        )
        .map_err(analysis_err)?
        .named(band.name.clone());

        band_reports.push(band_report_from(band, &dist));
        band_artifacts.push(BandArtifacts {
            name: band.name.clone(),
            snippet_sizes: surface.snippet_sizes().to_vec(),
            q_orders: surface.q_orders().to_vec(),
            values: (0..surface.q_orders().len())
                .map(|qi| {
                    (0..surface.snippet_sizes().len())
                        .map(|ti| surface.value(qi, ti))
                        .collect()
                })
                .collect(),
            five: five_number(&dist),
            mean: dist.mean,
            std: dist.std,
            window_fits: dist.estimates.len(),
        });
    }

    // Drift-based estimate on the smallest increments; attached to the
    // smallest-lag band only. A degenerate increment distribution (e.g. the
    // two-point law of an uncontaminated jigsaw) starves the kernel bins; the
    // series still reports its detrended-fluctuation results, with the
    // failure recorded on the band.
    let km_config = KmConfig {
        order: 2,
        bandwidth: config.km.bandwidth,
        grid_size: config.km.grid_size,
        min_occupancy: config.km.min_occupancy,
    };
    let km_outcome = build_ensemble(&path_series, &config.km.lags)
        .and_then(|ensemble| estimate_km(&ensemble, &km_config))
        .and_then(|field| hurst_from_drift(&field).map(|fit| (field, fit)));

    let smallest_band = series
        .bands
        .iter()
        .enumerate()
        .min_by_key(|(_, b)| b.tau_min)
        .map(|(i, _)| i)
        .expect("bands are non-empty");
    let km_drift = match &km_outcome {
        Ok((field, km_fit)) => {
            let report = &mut band_reports[smallest_band];
            report.h_km = Some(km_fit.hurst);
            report.km_b = km_fit.b;
            report.km_raw_b = km_fit.raw_b;
            report.km_lag = Some(km_fit.lag);
            report.discrepancy =
                Some((km_fit.hurst - report.h_mfdfa_mean).abs() > DISCREPANCY_THRESHOLD);
            let fit_lag = km_fit.lag;
            Some(KmDriftTable {
                lag: fit_lag,
                dx: field.grid().to_vec(),
                d1: field.d1_at(fit_lag).unwrap().to_vec(),
                d2: field
                    .d2_at(fit_lag)
                    .map(|v| v.to_vec())
                    .unwrap_or_else(|| vec![f64::NAN; field.grid().len()]),
                count: field.counts_at(fit_lag).unwrap().to_vec(),
                usable: field.usable_at(fit_lag).unwrap().to_vec(),
            })
        }
        Err(e) => {
            band_reports[smallest_band].km_error = Some(e.to_string());
            None
        }
    };

    let series_report = SeriesReport {
        label: series.name.clone(),
        form: series.form.as_str().to_string(),
        length: source_length,
        sample_interval_seconds: noise_series.sample_interval().num_seconds(),
        ingest,
        autocovariance: autocov_report.clone(),
        bands: band_reports,
    };
    let artifacts = SeriesArtifacts {
        label: series.name.clone(),
        autocov: autocov_report,
        bands: band_artifacts,
        km_drift,
    };
    Ok((series_report, artifacts))
}

fn band_report_from(band: &crate::config::BandConfig, dist: &HurstDistribution) -> BandReport {
    BandReport {
        band: band.name.clone(),
        tau_min: band.tau_min,
        tau_max: band.tau_max,
        detrend_order: band.detrend_order,
        h_mfdfa_mean: dist.mean,
        h_mfdfa_std: dist.std,
        five_number: five_number(dist),
        outliers: dist.outliers.clone(),
        window_fits: dist.estimates.len(),
        h_km: None,
        km_b: None,
        km_raw_b: None,
        km_lag: None,
        discrepancy: None,
        km_error: None,
    }
}

fn five_number(dist: &HurstDistribution) -> FiveNumber {
    FiveNumber {
        whisker_low: dist.whisker_low,
        q1: dist.q1,
        median: dist.median,
        q3: dist.q3,
        whisker_high: dist.whisker_high,
    }
}

fn analysis_err(e: hurst_core::Error) -> CliError {
    CliError::Analysis(e.to_string())
}

/// Write-temp-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

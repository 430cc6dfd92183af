use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, TimeDelta, Utc};
use clap::{Parser, Subcommand};

use hurst_cli::config::{AnalysisConfig, CliError, SourceConfig};
use hurst_cli::pipeline::run_analysis;
use hurst_core::ingest::{export_csv, load_csv, GapPolicy};
use hurst_core::synth::{generate, GeneratorSpec, Kind};

#[derive(Parser)]
#[command(
    name = "hurst",
    about = "Persistence and multifractal scaling analysis of price time series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured analyses and write report.json plus plot data.
    Analyze {
        /// Analysis config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a synthetic series as CSV in the ingestion schema.
    Generate {
        /// fgn | fbm_path | white_noise | brownian | jigsaw | ou
        #[arg(long)]
        kind: String,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Target Hurst exponent (fgn, fbm_path).
        #[arg(long)]
        hurst: Option<f64>,
        /// Increment amplitude.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Sampling interval in minutes.
        #[arg(long, default_value_t = 60)]
        interval_minutes: i64,
        /// Jigsaw half-period in samples.
        #[arg(long)]
        period: Option<usize>,
        /// Jigsaw white-noise contamination as a fraction of sigma.
        #[arg(long)]
        contamination: Option<f64>,
        /// Mean-reversion rate (ou).
        #[arg(long)]
        rate: Option<f64>,
        /// Mean-reversion level (ou).
        #[arg(long)]
        level: Option<f64>,
        /// First timestamp (RFC 3339), default 2020-01-01T00:00:00Z.
        #[arg(long)]
        start: Option<String>,
    },
    /// Validate a config and dry-run its CSV sources without writing output.
    IngestCheck {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Analyze { config, out } => analyze(config, out),
        Command::Generate {
            kind,
            length,
            seed,
            out,
            hurst,
            sigma,
            interval_minutes,
            period,
            contamination,
            rate,
            level,
            start,
        } => generate_csv(
            kind,
            length,
            seed,
            out,
            hurst,
            sigma,
            interval_minutes,
            period,
            contamination,
            rate,
            level,
            start,
        ),
        Command::IngestCheck { config } => ingest_check(config),
    }
}

fn analyze(config_path: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let config = match AnalysisConfig::from_path(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = match out.or_else(|| config.out_dir.clone()) {
        Some(dir) => dir,
        None => {
            eprintln!("error: config: no output directory (pass --out or set out_dir)");
            return ExitCode::from(2);
        }
    };
    match run_analysis(&config, &out_dir) {
        Ok(outcome) => {
            for series in &outcome.report.series {
                for band in &series.bands {
                    let km = match (&band.h_km, &band.km_error) {
                        (Some(h), _) => format!(", H_KM = {h:.3}"),
                        (None, Some(_)) => ", H_KM unavailable (see report)".to_string(),
                        (None, None) => String::new(),
                    };
                    let flag = if band.discrepancy == Some(true) {
                        " [method discrepancy]"
                    } else {
                        ""
                    };
                    println!(
                        "{} / {}: H = {:.3} ± {:.3}{km}{flag}",
                        series.label, band.band, band.h_mfdfa_mean, band.h_mfdfa_std
                    );
                }
            }
            for failure in &outcome.report.failures {
                eprintln!("failed: {}: {}", failure.label, failure.error);
            }
            println!("report: {}", outcome.report_path.display());
            if outcome.failed() > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn generate_csv(
    kind: String,
    length: usize,
    seed: u64,
    out: PathBuf,
    hurst: Option<f64>,
    sigma: f64,
    interval_minutes: i64,
    period: Option<usize>,
    contamination: Option<f64>,
    rate: Option<f64>,
    level: Option<f64>,
    start: Option<String>,
) -> ExitCode {
    let build = || -> Result<GeneratorSpec, String> {
        let kind = Kind::parse(&kind).map_err(|e| e.to_string())?;
        if interval_minutes <= 0 {
            return Err("interval-minutes must be positive".into());
        }
        let start_time = match start {
            Some(s) => DateTime::parse_from_rfc3339(&s)
                .map_err(|e| format!("bad start '{s}': {e}"))?
                .with_timezone(&Utc),
            None => DateTime::parse_from_rfc3339("2020-01-01T00:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
        };
        let mut spec = GeneratorSpec::new(kind, length, seed)
            .with_sigma(sigma)
            .with_grid(start_time, TimeDelta::minutes(interval_minutes));
        if let Some(h) = hurst {
            spec = spec.with_hurst(h);
        }
        if let Some(p) = period {
            spec = spec.with_block_period(p);
        }
        if let Some(c) = contamination {
            spec = spec.with_contamination(c);
        }
        if rate.is_some() || level.is_some() {
            spec = spec.with_ou(rate.unwrap_or(0.1), level.unwrap_or(0.0));
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    };
    let spec = match build() {
        Ok(spec) => spec,
        Err(msg) => {
            eprintln!("error: config: {msg}");
            return ExitCode::from(2);
        }
    };
    match generate(&spec).and_then(|series| export_csv(&series, &out).map(|()| series)) {
        Ok(series) => {
            println!(
                "wrote {} samples ({}) to {}",
                series.len(),
                series.label(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn ingest_check(config_path: PathBuf) -> ExitCode {
    let config = match AnalysisConfig::from_path(&config_path) {
        Ok(c) => c,
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut failed = 0usize;
    for series in &config.series {
        match &series.source {
            SourceConfig::Csv {
                path,
                schema,
                max_fill,
            } => match load_csv(path, schema, GapPolicy { max_fill: *max_fill }) {
                Ok((ts, report)) => {
                    println!(
                        "{}: {} rows -> {} samples on a uniform grid ({} gaps filled, \
                         {} duplicate timestamps averaged)",
                        series.name,
                        report.rows_read,
                        report.resulting_length,
                        report.gaps.len(),
                        report.duplicates.len()
                    );
                    println!(
                        "  span {} .. {}",
                        ts.start_time().to_rfc3339(),
                        ts.end_time().to_rfc3339()
                    );
                }
                Err(e) => {
                    eprintln!("{}: {e}", series.name);
                    failed += 1;
                }
            },
            SourceConfig::Generator(spec) => {
                println!(
                    "{}: generator {} (length {}, seed {})",
                    series.name,
                    spec.kind.as_str(),
                    spec.length,
                    spec.seed
                );
            }
        }
    }
    if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

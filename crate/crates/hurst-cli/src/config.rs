//! Declarative analysis configuration (TOML).
//!
//! A config names one or more series sources (CSV files or synthetic
//! generators), the scale bands with their detrending orders, and the
//! estimator settings. Band defaults follow the sampling interval: the
//! "hourly" band spans lags up to 12 hours with linear detrending, the
//! "daily" band 12 to 48 hours with quadratic detrending.

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeDelta, Utc};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use hurst_core::ingest::{IngestSchema, TimestampFormat};
use hurst_core::km::{Bandwidth, DEFAULT_GRID_SIZE, DEFAULT_MIN_OCCUPANCY};
use hurst_core::synth::{GeneratorSpec, Kind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;

/// How a series should be read by the scale analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesForm {
    /// Price-like path: the analysis studies its increments.
    Levels,
    /// The series already is the increment-like fluctuation signal; its
    /// cumulative sum forms the path for the drift estimation.
    Increments,
}

impl SeriesForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesForm::Levels => "levels",
            SeriesForm::Increments => "increments",
        }
    }
}

#[derive(Debug, Clone)]
pub enum SourceConfig {
    Csv {
        path: PathBuf,
        schema: IngestSchema,
        max_fill: usize,
    },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone)]
pub struct BandConfig {
    pub name: String,
    pub tau_min: usize,
    pub tau_max: usize,
    pub detrend_order: usize,
}

#[derive(Debug, Clone)]
pub struct SeriesConfig {
    pub name: String,
    pub source: SourceConfig,
    pub form: SeriesForm,
    pub bands: Vec<BandConfig>,
}

#[derive(Debug, Clone)]
pub struct MfdfaSettings {
    pub q_orders: Vec<f64>,
    pub min_window_points: usize,
    pub bidirectional: bool,
}

#[derive(Debug, Clone)]
pub struct KmSettings {
    pub lags: Vec<usize>,
    pub bandwidth: Bandwidth,
    pub grid_size: usize,
    pub min_occupancy: f64,
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub out_dir: Option<PathBuf>,
    pub autocov_max_lag: usize,
    pub mfdfa: MfdfaSettings,
    pub km: KmSettings,
    pub series: Vec<SeriesConfig>,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl AnalysisConfig {
    pub fn from_path(path: impl AsRef<Path>) -> CliResult<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        let hash = format!("{:x}", HexDigest(Sha256::digest(&bytes)));
        Self::from_toml(&text, hash)
    }

    pub fn from_toml(text: &str, config_hash: String) -> CliResult<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        raw.resolve(config_hash)
    }
}

struct HexDigest(sha2::digest::Output<Sha256>);

impl std::fmt::LowerHex for HexDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.0.iter() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    out_dir: Option<String>,
    autocov_max_lag: Option<usize>,
    mfdfa: Option<RawMfdfa>,
    km: Option<RawKm>,
    #[serde(default)]
    series: Vec<RawSeries>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMfdfa {
    q_orders: Option<Vec<f64>>,
    min_window_points: Option<usize>,
    bidirectional: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKm {
    lags: Option<Vec<usize>>,
    bandwidth: Option<toml::Value>,
    grid_size: Option<usize>,
    min_occupancy: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    name: String,
    source: RawSource,
    form: Option<String>,
    bands: Option<Vec<RawBand>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum RawSource {
    #[serde(rename = "csv")]
    Csv {
        path: String,
        timestamp_column: String,
        #[serde(default = "default_ts_format")]
        timestamp_format: String,
        price_column: String,
        #[serde(default = "default_delimiter")]
        delimiter: String,
        #[serde(default = "default_decimal")]
        decimal_separator: String,
        sample_interval_minutes: i64,
        max_fill: Option<usize>,
    },
    #[serde(rename = "generator")]
    Generator {
        generator: String,
        length: usize,
        seed: u64,
        hurst: Option<f64>,
        sigma: Option<f64>,
        block_period: Option<usize>,
        contamination: Option<f64>,
        mean_reversion_rate: Option<f64>,
        mean_level: Option<f64>,
        sample_interval_minutes: Option<i64>,
        start_time: Option<String>,
    },
}

fn default_ts_format() -> String {
    "iso8601".into()
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_decimal() -> String {
    ".".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBand {
    name: String,
    tau_min: usize,
    tau_max: usize,
    detrend_order: Option<usize>,
}

impl RawConfig {
    fn resolve(self, config_hash: String) -> CliResult<AnalysisConfig> {
        if self.series.is_empty() {
            return Err(CliError::Config("at least one [[series]] is required".into()));
        }
        let mfdfa = {
            let raw = self.mfdfa.unwrap_or(RawMfdfa {
                q_orders: None,
                min_window_points: None,
                bidirectional: None,
            });
            let settings = MfdfaSettings {
                q_orders: raw.q_orders.unwrap_or_else(|| vec![2.0]),
                min_window_points: raw.min_window_points.unwrap_or(3),
                bidirectional: raw.bidirectional.unwrap_or(true),
            };
            if !settings.q_orders.iter().any(|&q| (q - 2.0).abs() < 1e-9) {
                return Err(CliError::Config(
                    "mfdfa.q_orders must include q = 2 (the Hurst order)".into(),
                ));
            }
            if settings.min_window_points < 3 {
                return Err(CliError::Config("mfdfa.min_window_points must be >= 3".into()));
            }
            settings
        };
        let km = {
            let raw = self.km.unwrap_or(RawKm {
                lags: None,
                bandwidth: None,
                grid_size: None,
                min_occupancy: None,
            });
            let bandwidth = match raw.bandwidth {
                None => Bandwidth::Auto,
                Some(toml::Value::String(s)) if s == "auto" => Bandwidth::Auto,
                Some(toml::Value::Float(f)) if f > 0.0 => Bandwidth::Fixed(f),
                Some(toml::Value::Integer(i)) if i > 0 => Bandwidth::Fixed(i as f64),
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "km.bandwidth must be \"auto\" or a positive number, got {other}"
                    )))
                }
            };
            KmSettings {
                lags: raw.lags.unwrap_or_else(|| vec![1, 2, 3]),
                bandwidth,
                grid_size: raw.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
                min_occupancy: raw.min_occupancy.unwrap_or(DEFAULT_MIN_OCCUPANCY),
            }
        };

        let mut series = Vec::with_capacity(self.series.len());
        let mut seeds = Vec::new();
        for raw in self.series {
            let resolved = raw.resolve()?;
            if series
                .iter()
                .any(|s: &SeriesConfig| s.name == resolved.name)
            {
                return Err(CliError::Config(format!(
                    "duplicate series name '{}'",
                    resolved.name
                )));
            }
            if let SourceConfig::Generator(spec) = &resolved.source {
                seeds.push(spec.seed);
            }
            series.push(resolved);
        }

        Ok(AnalysisConfig {
            out_dir: self.out_dir.map(PathBuf::from),
            autocov_max_lag: self.autocov_max_lag.unwrap_or(48),
            mfdfa,
            km,
            series,
            config_hash,
            seeds,
        })
    }
}

impl RawSeries {
    fn resolve(self) -> CliResult<SeriesConfig> {
        let (source, interval, default_form) = match self.source {
            RawSource::Csv {
                path,
                timestamp_column,
                timestamp_format,
                price_column,
                delimiter,
                decimal_separator,
                sample_interval_minutes,
                max_fill,
            } => {
                let format = match timestamp_format.as_str() {
                    "iso8601" => TimestampFormat::Iso8601,
                    "epoch_seconds" => TimestampFormat::EpochSeconds,
                    other => {
                        return Err(CliError::Config(format!(
                            "timestamp_format must be 'iso8601' or 'epoch_seconds', got '{other}'"
                        )))
                    }
                };
                if sample_interval_minutes <= 0 {
                    return Err(CliError::Config(
                        "sample_interval_minutes must be positive".into(),
                    ));
                }
                let interval = TimeDelta::minutes(sample_interval_minutes);
                let delim_byte = single_byte(&delimiter, "delimiter")?;
                let decimal = single_char(&decimal_separator, "decimal_separator")?;
                let schema = IngestSchema::new(timestamp_column, format, price_column, interval)
                    .with_delimiter(delim_byte)
                    .with_decimal_separator(decimal);
                schema
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                (
                    SourceConfig::Csv {
                        path: PathBuf::from(path),
                        schema,
                        max_fill: max_fill.unwrap_or(4),
                    },
                    interval,
                    SeriesForm::Levels,
                )
            }
            RawSource::Generator {
                generator,
                length,
                seed,
                hurst,
                sigma,
                block_period,
                contamination,
                mean_reversion_rate,
                mean_level,
                sample_interval_minutes,
                start_time,
            } => {
                let kind = Kind::parse(&generator).map_err(|e| CliError::Config(e.to_string()))?;
                let interval = TimeDelta::minutes(sample_interval_minutes.unwrap_or(60));
                if interval <= TimeDelta::zero() {
                    return Err(CliError::Config(
                        "sample_interval_minutes must be positive".into(),
                    ));
                }
                let start = match start_time {
                    Some(s) => DateTime::parse_from_rfc3339(&s)
                        .map_err(|e| CliError::Config(format!("bad start_time '{s}': {e}")))?
                        .with_timezone(&Utc),
                    None => DateTime::parse_from_rfc3339("2020-01-01T00:00:00Z")
                        .unwrap()
                        .with_timezone(&Utc),
                };
                let mut spec = GeneratorSpec::new(kind, length, seed).with_grid(start, interval);
                if let Some(h) = hurst {
                    spec = spec.with_hurst(h);
                }
                if let Some(s) = sigma {
                    spec = spec.with_sigma(s);
                }
                if let Some(p) = block_period {
                    spec = spec.with_block_period(p);
                }
                if let Some(c) = contamination {
                    spec = spec.with_contamination(c);
                }
                if mean_reversion_rate.is_some() || mean_level.is_some() {
                    spec = spec.with_ou(
                        mean_reversion_rate.unwrap_or(0.1),
                        mean_level.unwrap_or(0.0),
                    );
                }
                spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
                let default_form = match kind {
                    Kind::Fgn | Kind::WhiteNoise => SeriesForm::Increments,
                    _ => SeriesForm::Levels,
                };
                (SourceConfig::Generator(spec), interval, default_form)
            }
        };

        let form = match self.form.as_deref() {
            None => default_form,
            Some("levels") => SeriesForm::Levels,
            Some("increments") => SeriesForm::Increments,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "form must be 'levels' or 'increments', got '{other}'"
                )))
            }
        };

        let bands = match self.bands {
            Some(raw_bands) => {
                let mut bands = Vec::with_capacity(raw_bands.len());
                for rb in raw_bands {
                    let detrend_order = rb.detrend_order.unwrap_or(match rb.name.as_str() {
                        "daily" => 2,
                        _ => 1,
                    });
                    let band = BandConfig {
                        name: rb.name,
                        tau_min: rb.tau_min,
                        tau_max: rb.tau_max,
                        detrend_order,
                    };
                    validate_band(&band)?;
                    if bands.iter().any(|b: &BandConfig| b.name == band.name) {
                        return Err(CliError::Config(format!(
                            "duplicate band name '{}' in series '{}'",
                            band.name, self.name
                        )));
                    }
                    bands.push(band);
                }
                if bands.is_empty() {
                    return Err(CliError::Config(format!(
                        "series '{}' declares an empty band list",
                        self.name
                    )));
                }
                bands
            }
            None => default_bands(interval)?,
        };

        Ok(SeriesConfig {
            name: self.name,
            source,
            form,
            bands,
        })
    }
}

fn validate_band(band: &BandConfig) -> CliResult<()> {
    if band.tau_min >= band.tau_max {
        return Err(CliError::Config(format!(
            "band '{}': tau_min {} must be below tau_max {}",
            band.name, band.tau_min, band.tau_max
        )));
    }
    if band.detrend_order < 1 {
        return Err(CliError::Config(format!(
            "band '{}': detrend order must be >= 1",
            band.name
        )));
    }
    if band.tau_min < band.detrend_order + 2 {
        return Err(CliError::Config(format!(
            "band '{}': tau_min {} cannot fit an order-{} polynomial (need >= {})",
            band.name,
            band.tau_min,
            band.detrend_order,
            band.detrend_order + 2
        )));
    }
    Ok(())
}

/// Hourly band: lags up to 12 h with DFA1 (lower bound 3 samples, the DFA1
/// minimum); daily band: 12 h to 48 h with DFA2.
pub fn default_bands(sample_interval: TimeDelta) -> CliResult<Vec<BandConfig>> {
    let ms = sample_interval.num_milliseconds();
    let hour_ms = 3_600_000i64;
    let to_samples = |hours: i64| -> usize { ((hours * hour_ms) / ms).max(1) as usize };
    let hourly = BandConfig {
        name: "hourly".into(),
        tau_min: 3.max(to_samples(1)),
        tau_max: to_samples(12),
        detrend_order: 1,
    };
    let daily = BandConfig {
        name: "daily".into(),
        tau_min: to_samples(12),
        tau_max: to_samples(48),
        detrend_order: 2,
    };
    for band in [&hourly, &daily] {
        if band.tau_max < band.tau_min + 3 {
            return Err(CliError::Config(format!(
                "sampling interval of {} s leaves no room for the default '{}' band; \
                 declare [[series.bands]] explicitly",
                sample_interval.num_seconds(),
                band.name
            )));
        }
    }
    Ok(vec![hourly, daily])
}

fn single_byte(s: &str, what: &str) -> CliResult<u8> {
    let bytes = s.as_bytes();
    if bytes.len() != 1 {
        return Err(CliError::Config(format!(
            "{what} must be a single ASCII character, got '{s}'"
        )));
    }
    Ok(bytes[0])
}

fn single_char(s: &str, what: &str) -> CliResult<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(CliError::Config(format!(
            "{what} must be a single character, got '{s}'"
        ))),
    }
}

//! CSV ingestion onto a strictly uniform UTC grid.
//!
//! Gaps up to a configurable span are filled by linear interpolation and
//! logged; duplicate timestamps (the DST fall-back signature) are averaged
//! and logged; longer outages are errors, never silently bridged. Negative
//! prices are genuine data and pass through unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, TimeDelta, TimeZone, Utc};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampFormat {
    /// ISO-8601 / RFC 3339 with an explicit offset, converted to UTC.
    Iso8601,
    /// Integer seconds since the Unix epoch (UTC by definition).
    EpochSeconds,
}

/// Column layout and grid expectations for one CSV source.
#[derive(Debug, Clone)]
pub struct IngestSchema {
    pub timestamp_column: String,
    pub timestamp_format: TimestampFormat,
    pub price_column: String,
    pub delimiter: u8,
    pub decimal_separator: char,
    pub sample_interval: TimeDelta,
}

impl IngestSchema {
    pub fn new(
        timestamp_column: impl Into<String>,
        timestamp_format: TimestampFormat,
        price_column: impl Into<String>,
        sample_interval: TimeDelta,
    ) -> Self {
        Self {
            timestamp_column: timestamp_column.into(),
            timestamp_format,
            price_column: price_column.into(),
            delimiter: b',',
            decimal_separator: '.',
            sample_interval,
        }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_decimal_separator(mut self, sep: char) -> Self {
        self.decimal_separator = sep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.decimal_separator == self.delimiter as char {
            return Err(Error::InvalidConfig(
                "delimiter and decimal separator must differ".into(),
            ));
        }
        if self.sample_interval <= TimeDelta::zero() {
            return Err(Error::InvalidConfig("sample interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GapPolicy {
    /// Longest run of missing samples that may be linearly interpolated.
    pub max_fill: usize,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self { max_fill: 4 }
    }
}

/// One interpolated gap: `missing` samples starting at `first_missing`.
#[derive(Debug, Clone)]
pub struct GapEvent {
    pub first_missing: DateTime<Utc>,
    pub missing: usize,
    pub method: &'static str,
}

/// Duplicate timestamps collapsed into their mean (DST fall-back).
#[derive(Debug, Clone)]
pub struct DuplicateEvent {
    pub timestamp: DateTime<Utc>,
    pub rows: usize,
    pub resolved_value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub rows_read: usize,
    pub gaps: Vec<GapEvent>,
    pub duplicates: Vec<DuplicateEvent>,
    /// Rows that took part in duplicate-timestamp resolution.
    pub dst_rows_affected: usize,
    pub resulting_length: usize,
}

/// Load a CSV file onto the uniform grid declared by the schema.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &IngestSchema,
    gap_policy: GapPolicy,
) -> Result<(TimeSeries, IngestReport)> {
    schema.validate()?;
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("missing column '{name}' in header"),
            })
    };
    let ts_col = column(&schema.timestamp_column)?;
    let price_col = column(&schema.price_column)?;

    let mut rows: Vec<(DateTime<Utc>, f64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        let ts_raw = record.get(ts_col).ok_or_else(|| Error::Parse {
            line,
            msg: "missing timestamp field".into(),
        })?;
        let ts = parse_timestamp(ts_raw.trim(), schema.timestamp_format, line)?;
        let price_raw = record.get(price_col).ok_or_else(|| Error::Parse {
            line,
            msg: "missing price field".into(),
        })?;
        let price = parse_price(price_raw.trim(), schema.decimal_separator, line)?;
        rows.push((ts, price));
    }
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 data rows, got {}",
            rows.len()
        )));
    }
    let rows_read = rows.len();

    // Collapse duplicate timestamps (fall-back rows). Equal timestamps are
    // necessarily adjacent in a monotonic file; any decrease is an error.
    let mut report = IngestReport {
        rows_read,
        ..IngestReport::default()
    };
    let mut collapsed: Vec<(DateTime<Utc>, f64)> = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let (ts, _) = rows[i];
        let mut j = i;
        let mut sum = 0.0;
        while j < rows.len() && rows[j].0 == ts {
            sum += rows[j].1;
            j += 1;
        }
        let count = j - i;
        let value = sum / count as f64;
        if count > 1 {
            report.duplicates.push(DuplicateEvent {
                timestamp: ts,
                rows: count,
                resolved_value: value,
            });
            report.dst_rows_affected += count;
        }
        if let Some(&(prev, _)) = collapsed.last() {
            if ts < prev {
                return Err(Error::Ordering(format!(
                    "timestamp {} precedes {} after UTC normalization",
                    ts.to_rfc3339(),
                    prev.to_rfc3339()
                )));
            }
        }
        collapsed.push((ts, value));
        i = j;
    }

    // Project onto the uniform grid, interpolating short gaps.
    let interval_ms = schema.sample_interval.num_milliseconds();
    let start = collapsed[0].0;
    let mut values: Vec<f64> = vec![collapsed[0].1];
    let mut prev_index = 0i64;
    for &(ts, price) in &collapsed[1..] {
        let offset = (ts - start).num_milliseconds();
        if offset % interval_ms != 0 {
            return Err(Error::Unaligned(format!(
                "{} is not a whole number of {}s intervals after {}",
                ts.to_rfc3339(),
                schema.sample_interval.num_seconds(),
                start.to_rfc3339()
            )));
        }
        let index = offset / interval_ms;
        let missing = (index - prev_index - 1) as usize;
        if missing > 0 {
            if missing > gap_policy.max_fill {
                return Err(Error::UnfillableGap(format!(
                    "{missing} samples missing before {} exceed max_fill = {}",
                    ts.to_rfc3339(),
                    gap_policy.max_fill
                )));
            }
            let prev_value = *values.last().unwrap();
            let span = (missing + 1) as f64;
            for k in 1..=missing {
                values.push(prev_value + (price - prev_value) * k as f64 / span);
            }
            report.gaps.push(GapEvent {
                first_missing: start + schema.sample_interval * (prev_index + 1) as i32,
                missing,
                method: "linear",
            });
        }
        values.push(price);
        prev_index = index;
    }

    report.resulting_length = values.len();
    debug_assert_eq!(values.len() as i64, prev_index + 1);
    let series = TimeSeries::new(values, start, schema.sample_interval, label)?;
    Ok((series, report))
}

fn parse_timestamp(raw: &str, format: TimestampFormat, line: usize) -> Result<DateTime<Utc>> {
    match format {
        TimestampFormat::Iso8601 => DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad ISO-8601 timestamp '{raw}': {e}"),
            }),
        TimestampFormat::EpochSeconds => {
            let secs: i64 = raw.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad epoch seconds '{raw}': {e}"),
            })?;
            Utc.timestamp_opt(secs, 0).single().ok_or_else(|| Error::Parse {
                line,
                msg: format!("epoch seconds '{raw}' out of range"),
            })
        }
    }
}

fn parse_price(raw: &str, decimal_separator: char, line: usize) -> Result<f64> {
    let normalized: String = if decimal_separator != '.' {
        raw.replace(decimal_separator, ".")
    } else {
        raw.to_string()
    };
    normalized.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("bad price '{raw}': {e}"),
    })
}

/// Half-open slice [start, end) on the uniform grid.
pub fn slice_series(x: &TimeSeries, start: DateTime<Utc>, end: DateTime<Utc>) -> Result<TimeSeries> {
    if start >= end {
        return Err(Error::Range(format!(
            "start {} must precede end {}",
            start.to_rfc3339(),
            end.to_rfc3339()
        )));
    }
    let t0 = x.start_time();
    let interval_ms = x.sample_interval().num_milliseconds();
    let after_last = x.end_time() + x.sample_interval();
    if start < t0 || end > after_last {
        return Err(Error::Range(format!(
            "[{}, {}) is outside the series span [{}, {})",
            start.to_rfc3339(),
            end.to_rfc3339(),
            t0.to_rfc3339(),
            after_last.to_rfc3339()
        )));
    }
    let first = div_ceil_ms((start - t0).num_milliseconds(), interval_ms);
    let past = div_ceil_ms((end - t0).num_milliseconds(), interval_ms);
    let count = past.saturating_sub(first);
    if count < 2 {
        return Err(Error::Range(format!(
            "slice holds {count} samples; a series needs at least 2"
        )));
    }
    let (first, past) = (first as usize, past as usize);
    TimeSeries::new(
        x.values()[first..past].to_vec(),
        x.timestamp_at(first),
        x.sample_interval(),
        x.label().to_string(),
    )
}

fn div_ceil_ms(num: i64, den: i64) -> i64 {
    (num + den - 1).div_euclid(den)
}

/// Re-export in the ingestion schema: `timestamp_utc,price`, RFC 3339
/// timestamps, full-precision decimals. Loading the output reproduces the
/// series exactly.
pub fn export_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, export_csv_string(series))?;
    Ok(())
}

pub fn export_csv_string(series: &TimeSeries) -> String {
    let mut out = String::from("timestamp_utc,price\n");
    for (i, &v) in series.values().iter().enumerate() {
        let ts = series
            .timestamp_at(i)
            .to_rfc3339_opts(SecondsFormat::Secs, true);
        let _ = writeln!(out, "{ts},{v}");
    }
    out
}

/// Schema matching [`export_csv`] output.
pub fn export_schema(sample_interval: TimeDelta) -> IngestSchema {
    IngestSchema::new(
        "timestamp_utc",
        TimestampFormat::Iso8601,
        "price",
        sample_interval,
    )
}

//! Machine-readable run report.
//!
//! One JSON document per run: provenance, one entry per configured series
//! with its per-band Hurst statistics (mean ± std headline plus the full
//! five-number summary), the smallest-lag increment autocovariance, the
//! drift-based Hurst estimate on the smallest-lag band, and a failure list
//! for series that could not be processed. The report payload is
//! deterministic for a fixed config; the only wall-clock field lives in
//! `provenance.created_utc`.

use serde::{Deserialize, Serialize};

use hurst_core::ingest::IngestReport;

/// Flag threshold: KM and MFDFA disagree beyond estimation scatter.
pub const DISCREPANCY_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HurstReport {
    pub provenance: Provenance,
    pub series: Vec<SeriesReport>,
    pub failures: Vec<FailureReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// The single non-deterministic field of the report.
    pub created_utc: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesReport {
    pub label: String,
    pub form: String,
    pub length: usize,
    pub sample_interval_seconds: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestSummary>,
    pub autocovariance: AutocovarianceReport,
    pub bands: Vec<BandReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub gaps: Vec<GapSummary>,
    pub duplicates: Vec<DuplicateSummary>,
    pub dst_rows_affected: usize,
    pub resulting_length: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSummary {
    pub first_missing_utc: String,
    pub missing: usize,
    pub method: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuplicateSummary {
    pub timestamp_utc: String,
    pub rows: usize,
    pub resolved_value: f64,
}

impl From<&IngestReport> for IngestSummary {
    fn from(r: &IngestReport) -> Self {
        Self {
            rows_read: r.rows_read,
            gaps: r
                .gaps
                .iter()
                .map(|g| GapSummary {
                    first_missing_utc: g.first_missing.to_rfc3339(),
                    missing: g.missing,
                    method: g.method.to_string(),
                })
                .collect(),
            duplicates: r
                .duplicates
                .iter()
                .map(|d| DuplicateSummary {
                    timestamp_utc: d.timestamp.to_rfc3339(),
                    rows: d.rows,
                    resolved_value: d.resolved_value,
                })
                .collect(),
            dst_rows_affected: r.dst_rows_affected,
            resulting_length: r.resulting_length,
        }
    }
}

/// Normalized autocovariance of the smallest-lag increments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocovarianceReport {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiveNumber {
    pub whisker_low: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_high: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandReport {
    pub band: String,
    pub tau_min: usize,
    pub tau_max: usize,
    pub detrend_order: usize,
    /// Headline statistic: mean ± std over the fit-window family.
    pub h_mfdfa_mean: f64,
    pub h_mfdfa_std: f64,
    pub five_number: FiveNumber,
    pub outliers: Vec<f64>,
    pub window_fits: usize,
    /// Drift-based estimate; present only on the smallest-lag band.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub km_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub km_raw_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub km_lag: Option<usize>,
    /// Set iff both methods are present and |H_KM − H_MFDFA,mean| exceeds
    /// [`DISCREPANCY_THRESHOLD`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<bool>,
    /// Why the drift estimate is missing (degenerate increment
    /// distributions, insufficient kernel occupancy).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub km_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureReport {
    pub label: String,
    pub error: String,
}

impl HurstReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Payload with the wall-clock field blanked, for reproducibility
    /// comparisons.
    pub fn deterministic_payload(&self) -> serde_json::Result<String> {
        let mut clone = self.clone();
        clone.provenance.created_utc = String::new();
        clone.to_json()
    }
}

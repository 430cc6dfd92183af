//! Series types and the model-free increment statistics: increments,
//! structure functions, and autocovariance.
//!
//! Everything here is a pure function of immutable inputs. Moment and
//! autocovariance estimators use the biased divisor `N` throughout, so the
//! normalized autocovariance is bounded by 1 in magnitude at every lag.

use chrono::{DateTime, TimeDelta, Utc};

use crate::error::{Error, Result};

/// Floating tolerance for statements that hold exactly in real arithmetic.
pub const EPS_NUM: f64 = 1e-9;

/// A uniformly sampled scalar series with calendar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_time: DateTime<Utc>,
    sample_interval: TimeDelta,
    label: String,
}

impl TimeSeries {
    /// Build a series, enforcing length >= 2, a positive sampling interval,
    /// and finite values. Gaps must be resolved before a series exists; see
    /// the ingest module.
    pub fn new(
        values: Vec<f64>,
        start_time: DateTime<Utc>,
        sample_interval: TimeDelta,
        label: impl Into<String>,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "series needs at least 2 values, got {}",
                values.len()
            )));
        }
        if sample_interval <= TimeDelta::zero() {
            return Err(Error::InvalidArgument(
                "sample interval must be positive".into(),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at index {bad}"
            )));
        }
        Ok(Self {
            values,
            start_time,
            sample_interval,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn sample_interval(&self) -> TimeDelta {
        self.sample_interval
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Timestamp of sample `i` on the uniform grid.
    pub fn timestamp_at(&self, i: usize) -> DateTime<Utc> {
        self.start_time + self.sample_interval * i as i32
    }

    pub fn end_time(&self) -> DateTime<Utc> {
        self.timestamp_at(self.values.len() - 1)
    }

    /// Same grid, new values. Length must match.
    pub fn with_values(&self, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "replacement values length {} != series length {}",
                values.len(),
                self.values.len()
            )));
        }
        Self::new(values, self.start_time, self.sample_interval, label)
    }
}

/// Increment series Δx_τ(t) = x(t+τ) − x(t) at a fixed lag τ (in samples).
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    values: Vec<f64>,
    lag: usize,
    parent_label: String,
    sample_interval: TimeDelta,
}

impl IncrementSeries {
    /// Wrap an already-computed increment series (used by the synthetic
    /// generators and tests). Prefer [`make_increments`].
    pub fn from_parts(
        values: Vec<f64>,
        lag: usize,
        parent_label: impl Into<String>,
        sample_interval: TimeDelta,
    ) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidLag {
                lag,
                len: values.len() + lag,
            });
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty increment series".into()));
        }
        Ok(Self {
            values,
            lag,
            parent_label: parent_label.into(),
            sample_interval,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn parent_label(&self) -> &str {
        &self.parent_label
    }

    pub fn sample_interval(&self) -> TimeDelta {
        self.sample_interval
    }
}

/// Sample moments S_n(τ) of the increments over a grid of lags and orders.
#[derive(Debug, Clone)]
pub struct StructureFunctionTable {
    lags: Vec<usize>,
    orders: Vec<u32>,
    /// `moments[oi][li]` = S_{orders[oi]}(lags[li]); orders-major.
    moments: Vec<Vec<f64>>,
}

impl StructureFunctionTable {
    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Row of S_n(τ) values over all lags for one order.
    pub fn row(&self, order: u32) -> Option<&[f64]> {
        self.orders
            .iter()
            .position(|&o| o == order)
            .map(|oi| self.moments[oi].as_slice())
    }

    pub fn moment(&self, order_index: usize, lag_index: usize) -> f64 {
        self.moments[order_index][lag_index]
    }
}

/// Autocovariance C(k) of an increment series for k = 0..=max_lag,
/// optionally normalized by the lag-0 value.
#[derive(Debug, Clone)]
pub struct AutocovarianceSequence {
    values: Vec<f64>,
    normalized: bool,
    mean_used: f64,
}

impl AutocovarianceSequence {
    /// Value at lag `k`; lags run 0..=max_lag.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn mean_used(&self) -> f64 {
        self.mean_used
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Δx_τ(t) = x(t+τ) − x(t) for t = 0..len−τ−1.
pub fn make_increments(x: &TimeSeries, lag: usize) -> Result<IncrementSeries> {
    let n = x.len();
    if lag == 0 || lag >= n {
        return Err(Error::InvalidLag { lag, len: n });
    }
    let v = x.values();
    let values: Vec<f64> = (0..n - lag).map(|t| v[t + lag] - v[t]).collect();
    IncrementSeries::from_parts(values, lag, x.label(), x.sample_interval())
}

/// Structure function S_n(τ) = ⟨Δx_τ^n⟩, signed for odd orders.
pub fn structure_function(
    x: &TimeSeries,
    lags: &[usize],
    orders: &[u32],
) -> Result<StructureFunctionTable> {
    if lags.is_empty() || orders.is_empty() {
        return Err(Error::InvalidArgument(
            "structure function needs at least one lag and one order".into(),
        ));
    }
    if let Some(&bad) = orders.iter().find(|&&o| o == 0) {
        return Err(Error::InvalidArgument(format!(
            "orders must be positive integers, got {bad}"
        )));
    }
    let mut moments = vec![vec![0.0; lags.len()]; orders.len()];
    for (li, &lag) in lags.iter().enumerate() {
        let inc = make_increments(x, lag)?;
        let n = inc.len() as f64;
        for (oi, &order) in orders.iter().enumerate() {
            let sum: f64 = inc.values().iter().map(|&d| d.powi(order as i32)).sum();
            moments[oi][li] = sum / n;
        }
    }
    Ok(StructureFunctionTable {
        lags: lags.to_vec(),
        orders: orders.to_vec(),
        moments,
    })
}

/// Autocovariance of an increment series with a single full-sample mean and
/// divisor N at every lag, so the normalized sequence stays within [-1, 1].
///
/// Independent increments have vanishing autocovariance at every positive
/// lag (lag 0 is the variance); a memoryless check therefore looks at
/// lags >= 1 only.
pub fn autocovariance(
    inc: &IncrementSeries,
    max_lag: usize,
    normalize: bool,
) -> Result<AutocovarianceSequence> {
    let n = inc.len();
    if max_lag == 0 || 2 * max_lag >= n {
        return Err(Error::InvalidArgument(format!(
            "max_lag {max_lag} must be positive and below half the series length {n}"
        )));
    }
    let mu = mean(inc.values());
    let centered: Vec<f64> = inc.values().iter().map(|&v| v - mu).collect();
    let mut values = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let sum: f64 = centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum();
        values.push(sum / n as f64);
    }
    if normalize {
        let c0 = values[0];
        if c0 <= 0.0 {
            return Err(Error::DegenerateSeries(
                "lag-0 autocovariance is zero; cannot normalize constant increments".into(),
            ));
        }
        for v in values.iter_mut() {
            *v /= c0;
        }
    }
    Ok(AutocovarianceSequence {
        values,
        normalized: normalize,
        mean_used: mu,
    })
}

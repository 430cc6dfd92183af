//! Multifractal detrended fluctuation analysis.
//!
//! The pipeline: cumulate the mean-subtracted input into a profile, cut the
//! profile into snippets of size τ, subtract a least-squares polynomial of
//! degree m per snippet, average powers of the residual variances into the
//! fluctuation function F_q(τ), and read scaling exponents h(q) off log-log
//! fits. h(2) is the Hurst estimate. Fit-window families over a scale band
//! give the box-whisker dispersion statistics.

use crate::error::{Error, Result};
use crate::series::{mean, StructureFunctionTable, TimeSeries};

/// Snippet grid, moment orders, and detrending degree for one analysis.
#[derive(Debug, Clone)]
pub struct MfdfaConfig {
    pub snippet_sizes: Vec<usize>,
    pub q_orders: Vec<f64>,
    pub detrend_order: usize,
    /// Segment from both ends when the length is not a multiple of τ.
    pub bidirectional: bool,
}

impl MfdfaConfig {
    pub fn new(
        snippet_sizes: Vec<usize>,
        q_orders: Vec<f64>,
        detrend_order: usize,
        bidirectional: bool,
    ) -> Result<Self> {
        if detrend_order < 1 {
            return Err(Error::InvalidConfig("detrend order must be >= 1".into()));
        }
        if snippet_sizes.is_empty() {
            return Err(Error::InvalidConfig("no snippet sizes".into()));
        }
        if !snippet_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "snippet sizes must be strictly increasing".into(),
            ));
        }
        if snippet_sizes[0] < detrend_order + 2 {
            return Err(Error::InvalidConfig(format!(
                "smallest snippet {} cannot fit an order-{} polynomial (need >= {})",
                snippet_sizes[0],
                detrend_order,
                detrend_order + 2
            )));
        }
        if q_orders.is_empty() || q_orders.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidConfig("q orders must be finite and non-empty".into()));
        }
        Ok(Self {
            snippet_sizes,
            q_orders,
            detrend_order,
            bidirectional,
        })
    }

    /// Default grid: 24 geometrically spaced sizes from max(m+2, 4) to len/4.
    pub fn default_for(len: usize, detrend_order: usize) -> Result<Self> {
        let sizes = default_snippet_sizes(len, detrend_order)?;
        Self::new(sizes, vec![2.0], detrend_order, true)
    }

    fn check_length(&self, len: usize) -> Result<()> {
        let max = *self.snippet_sizes.last().unwrap();
        if max > len / 4 {
            return Err(Error::InvalidConfig(format!(
                "largest snippet {max} exceeds length/4 = {}",
                len / 4
            )));
        }
        Ok(())
    }
}

pub fn default_snippet_sizes(len: usize, detrend_order: usize) -> Result<Vec<usize>> {
    let lo = (detrend_order + 2).max(4);
    let hi = len / 4;
    if hi < lo {
        return Err(Error::InvalidConfig(format!(
            "series length {len} too short for snippets in [{lo}, len/4]"
        )));
    }
    let (lo_f, hi_f) = (lo as f64, hi as f64);
    let mut sizes: Vec<usize> = (0..24)
        .map(|i| {
            let t = i as f64 / 23.0;
            (lo_f * (hi_f / lo_f).powf(t)).round() as usize
        })
        .collect();
    sizes.dedup();
    Ok(sizes)
}

/// Fluctuation function F_q(τ) on the configured grid; entries are strictly
/// positive and finite.
#[derive(Debug, Clone)]
pub struct FluctuationSurface {
    snippet_sizes: Vec<usize>,
    q_orders: Vec<f64>,
    /// q-major: `values[qi][ti]` = F_{q_orders[qi]}(snippet_sizes[ti]).
    values: Vec<Vec<f64>>,
    detrend_order: usize,
    series_label: String,
}

impl FluctuationSurface {
    pub fn snippet_sizes(&self) -> &[usize] {
        &self.snippet_sizes
    }

    pub fn q_orders(&self) -> &[f64] {
        &self.q_orders
    }

    pub fn detrend_order(&self) -> usize {
        self.detrend_order
    }

    pub fn series_label(&self) -> &str {
        &self.series_label
    }

    pub fn value(&self, q_index: usize, size_index: usize) -> f64 {
        self.values[q_index][size_index]
    }

    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_orders.iter().position(|&o| (o - q).abs() < 1e-9)
    }

    pub fn q_row(&self, q: f64) -> Option<&[f64]> {
        self.q_index(q).map(|qi| self.values[qi].as_slice())
    }
}

/// Power-law fit of one q row over a snippet range: slope h(q), log-amplitude
/// intercept, and RMS residual of the log-log OLS.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    pub q: f64,
    pub fit_range: (usize, usize),
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Box-whisker statistics of h(2) over all contiguous fit sub-windows of a
/// scale band.
#[derive(Debug, Clone)]
pub struct HurstDistribution {
    pub estimates: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub scale_band: (usize, usize),
    pub band_name: String,
}

impl HurstDistribution {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.band_name = name.into();
        self
    }
}

/// Cumulative sum of the mean-subtracted series. Requires length >= 4.
pub fn profile(x: &TimeSeries) -> Result<TimeSeries> {
    if x.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "profile needs at least 4 samples, got {}",
            x.len()
        )));
    }
    let mu = mean(x.values());
    let mut acc = 0.0;
    let values: Vec<f64> = x
        .values()
        .iter()
        .map(|&v| {
            acc += v - mu;
            acc
        })
        .collect();
    x.with_values(values, x.label().to_string())
}

/// Mean squared residual of a degree-m least-squares detrend, per snippet.
///
/// The profile is cut into ⌊len/τ⌋ disjoint snippets from the head; when
/// `bidirectional` and the length is not a multiple of τ, the same count is
/// taken from the tail as well.
pub fn segment_variances(
    p: &TimeSeries,
    snippet_size: usize,
    detrend_order: usize,
    bidirectional: bool,
) -> Result<Vec<f64>> {
    let values = p.values();
    let n = values.len();
    if detrend_order < 1 {
        return Err(Error::InvalidConfig("detrend order must be >= 1".into()));
    }
    if snippet_size < detrend_order + 2 {
        return Err(Error::InvalidConfig(format!(
            "snippet size {snippet_size} too small for an order-{detrend_order} polynomial fit"
        )));
    }
    if snippet_size > n {
        return Err(Error::InvalidConfig(format!(
            "snippet size {snippet_size} exceeds profile length {n}"
        )));
    }
    let detrender = PolyDetrender::new(snippet_size, detrend_order)?;
    let segments = n / snippet_size;
    let mut variances = Vec::with_capacity(2 * segments);
    for s in 0..segments {
        let start = s * snippet_size;
        variances.push(detrender.residual_variance(&values[start..start + snippet_size]));
    }
    if bidirectional && n % snippet_size != 0 {
        for s in 0..segments {
            let end = n - s * snippet_size;
            variances.push(detrender.residual_variance(&values[end - snippet_size..end]));
        }
    }
    Ok(variances)
}

/// F_q(τ) from per-size snippet variances: the q/2 power mean for q ≠ 0 and
/// the logarithmic-average limit exp(½⟨ln v⟩) for q = 0.
pub fn fluctuation_function(
    snippet_sizes: &[usize],
    variances_by_size: &[Vec<f64>],
    q_orders: &[f64],
    detrend_order: usize,
    series_label: impl Into<String>,
) -> Result<FluctuationSurface> {
    if snippet_sizes.len() != variances_by_size.len() || snippet_sizes.is_empty() {
        return Err(Error::InvalidArgument(
            "need one non-empty variance list per snippet size".into(),
        ));
    }
    if q_orders.is_empty() {
        return Err(Error::InvalidArgument("no q orders".into()));
    }
    for (ti, vs) in variances_by_size.iter().enumerate() {
        if vs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no snippet variances for size {}",
                snippet_sizes[ti]
            )));
        }
        if vs.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite variance".into()));
        }
    }
    let mut values = vec![vec![0.0; snippet_sizes.len()]; q_orders.len()];
    for (qi, &q) in q_orders.iter().enumerate() {
        for (ti, vs) in variances_by_size.iter().enumerate() {
            let n = vs.len() as f64;
            let f = if q == 0.0 {
                if vs.contains(&0.0) {
                    return Err(Error::DegenerateVariance(format!(
                        "zero snippet variance at size {} with q = 0",
                        snippet_sizes[ti]
                    )));
                }
                (0.5 * vs.iter().map(|&v| v.ln()).sum::<f64>() / n).exp()
            } else {
                if q < 0.0 && vs.contains(&0.0) {
                    return Err(Error::DegenerateVariance(format!(
                        "zero snippet variance at size {} with q = {q}",
                        snippet_sizes[ti]
                    )));
                }
                let avg = vs.iter().map(|&v| v.powf(q / 2.0)).sum::<f64>() / n;
                avg.powf(1.0 / q)
            };
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::DegenerateVariance(format!(
                    "fluctuation F_{q}({}) = {f} is not positive",
                    snippet_sizes[ti]
                )));
            }
            values[qi][ti] = f;
        }
    }
    Ok(FluctuationSurface {
        snippet_sizes: snippet_sizes.to_vec(),
        q_orders: q_orders.to_vec(),
        values,
        detrend_order,
        series_label: series_label.into(),
    })
}

/// Full run: profile, per-size detrended variances, fluctuation surface.
pub fn analyze(x: &TimeSeries, config: &MfdfaConfig) -> Result<FluctuationSurface> {
    config.check_length(x.len())?;
    let p = profile(x)?;
    let variances: Vec<Vec<f64>> = config
        .snippet_sizes
        .iter()
        .map(|&tau| segment_variances(&p, tau, config.detrend_order, config.bidirectional))
        .collect::<Result<_>>()?;
    fluctuation_function(
        &config.snippet_sizes,
        &variances,
        &config.q_orders,
        config.detrend_order,
        x.label(),
    )
}

/// OLS of log F_q(τ) against log τ restricted to `fit_range` (inclusive).
pub fn fit_scaling(
    surface: &FluctuationSurface,
    q: f64,
    fit_range: (usize, usize),
) -> Result<ScalingFit> {
    let qi = surface.q_index(q).ok_or_else(|| {
        Error::InvalidArgument(format!("q = {q} is not on the surface's q grid"))
    })?;
    let (lo, hi) = fit_range;
    if lo >= hi {
        return Err(Error::InsufficientRange(format!(
            "fit range [{lo}, {hi}] is empty"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ti, &tau) in surface.snippet_sizes.iter().enumerate() {
        if tau >= lo && tau <= hi {
            xs.push((tau as f64).ln());
            ys.push(surface.values[qi][ti].ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientRange(format!(
            "only {} grid points inside [{lo}, {hi}], need at least 3",
            xs.len()
        )));
    }
    let (slope, intercept, residual) = ols(&xs, &ys);
    Ok(ScalingFit {
        q,
        fit_range,
        slope,
        intercept,
        residual,
    })
}

/// Power-law fit of a structure-function row S_n(τ) = C_n τ^{ξ(n)}; the
/// returned slope is ξ(n). Requires positive moments over the range.
pub fn fit_structure_scaling(
    table: &StructureFunctionTable,
    order: u32,
    fit_range: (usize, usize),
) -> Result<ScalingFit> {
    let row = table.row(order).ok_or_else(|| {
        Error::InvalidArgument(format!("order {order} not present in the table"))
    })?;
    let (lo, hi) = fit_range;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (li, &lag) in table.lags().iter().enumerate() {
        if lag >= lo && lag <= hi {
            if row[li] <= 0.0 {
                return Err(Error::DegenerateVariance(format!(
                    "non-positive moment S_{order}({lag}) cannot be log-fitted"
                )));
            }
            xs.push((lag as f64).ln());
            ys.push(row[li].ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientRange(format!(
            "only {} lags inside [{lo}, {hi}], need at least 3",
            xs.len()
        )));
    }
    let (slope, intercept, residual) = ols(&xs, &ys);
    Ok(ScalingFit {
        q: order as f64,
        fit_range,
        slope,
        intercept,
        residual,
    })
}

/// h(2) over every contiguous sub-window of the band's grid points with at
/// least `min_window_points` points, summarized as box-whisker statistics
/// (1.5·IQR whiskers, points beyond reported as outliers).
pub fn hurst_distribution(
    surface: &FluctuationSurface,
    scale_band: (usize, usize),
    min_window_points: usize,
) -> Result<HurstDistribution> {
    if min_window_points < 3 {
        return Err(Error::InvalidConfig(
            "min_window_points must be at least 3".into(),
        ));
    }
    let (lo, hi) = scale_band;
    let indices: Vec<usize> = surface
        .snippet_sizes
        .iter()
        .enumerate()
        .filter(|(_, &tau)| tau >= lo && tau <= hi)
        .map(|(i, _)| i)
        .collect();
    if indices.len() < min_window_points + 1 {
        return Err(Error::InsufficientRange(format!(
            "band [{lo}, {hi}] holds {} grid points, need at least {}",
            indices.len(),
            min_window_points + 1
        )));
    }
    let mut estimates = Vec::new();
    for wi in 0..indices.len() {
        for wj in wi + min_window_points - 1..indices.len() {
            let range = (
                surface.snippet_sizes[indices[wi]],
                surface.snippet_sizes[indices[wj]],
            );
            estimates.push(fit_scaling(surface, 2.0, range)?.slope);
        }
    }
    Ok(box_whisker(estimates, scale_band))
}

fn box_whisker(estimates: Vec<f64>, scale_band: (usize, usize)) -> HurstDistribution {
    let mut sorted = estimates.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    // Fences carry a tiny absolute guard so that zero-width boxes do not
    // flag pure floating-point jitter as outliers.
    let guard = 1e-12 * (1.0 + median.abs());
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr - guard, q3 + 1.5 * iqr + guard);
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&v| v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= hi_fence)
        .unwrap_or(*sorted.last().unwrap());
    let outliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    HurstDistribution {
        estimates,
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
        mean,
        std,
        scale_band,
        band_name: "custom".into(),
    }
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Least-squares polynomial detrend for snippets of a fixed size. Positions
/// are scaled to [-1, 1] and the normal matrix (shared by every snippet of
/// the same size) is LU-factored once.
struct PolyDetrender {
    positions: Vec<f64>,
    order: usize,
    lu: Lu,
}

impl PolyDetrender {
    fn new(size: usize, order: usize) -> Result<Self> {
        let positions: Vec<f64> = (0..size)
            .map(|i| 2.0 * i as f64 / (size - 1) as f64 - 1.0)
            .collect();
        // Power sums p_r = Σ x^r for r = 0..2m fill the normal matrix.
        let mut power_sums = vec![0.0; 2 * order + 1];
        for &x in &positions {
            let mut pw = 1.0;
            for p in power_sums.iter_mut() {
                *p += pw;
                pw *= x;
            }
        }
        let dim = order + 1;
        let mut matrix = vec![0.0; dim * dim];
        for j in 0..dim {
            for k in 0..dim {
                matrix[j * dim + k] = power_sums[j + k];
            }
        }
        let lu = Lu::factor(matrix, dim).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "singular normal matrix for snippet size {size}, order {order}"
            ))
        })?;
        Ok(Self {
            positions,
            order,
            lu,
        })
    }

    /// Mean squared residual after subtracting the least-squares polynomial.
    fn residual_variance(&self, snippet: &[f64]) -> f64 {
        let dim = self.order + 1;
        let mut rhs = vec![0.0; dim];
        for (&x, &y) in self.positions.iter().zip(snippet) {
            let mut pw = 1.0;
            for r in rhs.iter_mut() {
                *r += pw * y;
                pw *= x;
            }
        }
        self.lu.solve(&mut rhs);
        // Residuals evaluated explicitly (Horner) to avoid the cancellation
        // of the sum-of-squares shortcut near exact fits.
        let mut rss = 0.0;
        for (&x, &y) in self.positions.iter().zip(snippet) {
            let mut fit = rhs[dim - 1];
            for j in (0..dim - 1).rev() {
                fit = fit * x + rhs[j];
            }
            rss += (y - fit) * (y - fit);
        }
        rss / snippet.len() as f64
    }
}

/// Small dense LU with partial pivoting.
struct Lu {
    dim: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl Lu {
    fn factor(mut data: Vec<f64>, dim: usize) -> Option<Self> {
        let mut pivots = vec![0; dim];
        for col in 0..dim {
            let mut pivot = col;
            let mut best = data[col * dim + col].abs();
            for row in col + 1..dim {
                let v = data[row * dim + col].abs();
                if v > best {
                    best = v;
                    pivot = row;
                }
            }
            if best == 0.0 {
                return None;
            }
            pivots[col] = pivot;
            if pivot != col {
                for k in 0..dim {
                    data.swap(col * dim + k, pivot * dim + k);
                }
            }
            let diag = data[col * dim + col];
            for row in col + 1..dim {
                let factor = data[row * dim + col] / diag;
                data[row * dim + col] = factor;
                for k in col + 1..dim {
                    data[row * dim + k] -= factor * data[col * dim + k];
                }
            }
        }
        Some(Self { dim, data, pivots })
    }

    fn solve(&self, b: &mut [f64]) {
        let dim = self.dim;
        for col in 0..dim {
            b.swap(col, self.pivots[col]);
        }
        for row in 1..dim {
            for col in 0..row {
                b[row] -= self.data[row * dim + col] * b[col];
            }
        }
        for row in (0..dim).rev() {
            for col in row + 1..dim {
                b[row] -= self.data[row * dim + col] * b[col];
            }
            b[row] /= self.data[row * dim + row];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::EPS_NUM;
    use crate::synth::{generate, GeneratorSpec, Kind};
    use chrono::{DateTime, TimeDelta, Utc};

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(
            values,
            DateTime::parse_from_rfc3339("2020-01-01T00:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            TimeDelta::hours(1),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn profile_of_constant_is_zero() {
        let p = profile(&ts(vec![1.0; 4])).unwrap();
        assert_eq!(p.values(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn profile_of_alternating_series() {
        let p = profile(&ts(vec![1.0, -1.0, 1.0, -1.0])).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn profile_rejects_short_series() {
        assert!(profile(&ts(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn dfa1_annihilates_linear_trends() {
        let values: Vec<f64> = (0..512).map(|i| 3.5 * i as f64 - 100.0).collect();
        let p = ts(values);
        for tau in [4usize, 16, 64, 128] {
            let vars = segment_variances(&p, tau, 1, true).unwrap();
            assert!(
                vars.iter().all(|&v| v <= EPS_NUM),
                "tau={tau}: max variance {:?}",
                vars.iter().cloned().fold(0.0f64, f64::max)
            );
        }
    }

    #[test]
    fn dfa2_annihilates_quadratic_trends() {
        let values: Vec<f64> = (0..512)
            .map(|i| {
                let x = i as f64;
                0.02 * x * x - 3.0 * x + 7.0
            })
            .collect();
        let p = ts(values);
        for tau in [5usize, 16, 64, 128] {
            let vars = segment_variances(&p, tau, 2, true).unwrap();
            assert!(vars.iter().all(|&v| v <= EPS_NUM));
        }
    }

    #[test]
    fn snippet_too_small_for_order() {
        let p = ts(vec![0.0; 64]);
        assert!(matches!(
            segment_variances(&p, 3, 2, true),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn higher_order_detrending_annihilates_cubics() {
        let values: Vec<f64> = (0..512)
            .map(|i| {
                let x = i as f64 / 100.0;
                x * x * x - 4.0 * x * x + x - 3.0
            })
            .collect();
        let p = ts(values);
        for tau in [8usize, 32, 128] {
            let vars = segment_variances(&p, tau, 3, true).unwrap();
            assert!(vars.iter().all(|&v| v <= EPS_NUM));
        }
    }

    #[test]
    fn bidirectional_doubles_snippets_on_nondivisible_lengths() {
        let p = ts((0..100).map(|i| (i as f64).sin()).collect());
        let forward_only = segment_variances(&p, 16, 1, false).unwrap();
        assert_eq!(forward_only.len(), 6);
        let both = segment_variances(&p, 16, 1, true).unwrap();
        assert_eq!(both.len(), 12);
        // Divisible length: no doubling.
        let p2 = ts((0..96).map(|i| (i as f64).sin()).collect());
        assert_eq!(segment_variances(&p2, 16, 1, true).unwrap().len(), 6);
    }

    /// Brute-force oracle: per-snippet simple linear regression in raw
    /// coordinates via the closed-form slope/intercept, independent of the
    /// scaled-LU path used by the implementation.
    fn brute_force_dfa1(values: &[f64], tau: usize) -> Vec<f64> {
        let segments = values.len() / tau;
        let mut out = Vec::with_capacity(segments);
        for s in 0..segments {
            let snippet = &values[s * tau..(s + 1) * tau];
            let n = tau as f64;
            let xbar = (n - 1.0) / 2.0;
            let ybar = snippet.iter().sum::<f64>() / n;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (i, &y) in snippet.iter().enumerate() {
                let dx = i as f64 - xbar;
                sxy += dx * (y - ybar);
                sxx += dx * dx;
            }
            let slope = sxy / sxx;
            let rss: f64 = snippet
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    let fit = ybar + slope * (i as f64 - xbar);
                    (y - fit) * (y - fit)
                })
                .sum();
            out.push(rss / n);
        }
        out
    }

    #[test]
    fn oracle_equivalence_on_64_point_fixture() {
        let noise = generate(&GeneratorSpec::new(Kind::WhiteNoise, 64, 77)).unwrap();
        let p = profile(&noise).unwrap();
        let ours = segment_variances(&p, 8, 1, false).unwrap();
        let oracle = brute_force_dfa1(p.values(), 8);
        assert_eq!(ours.len(), oracle.len());
        for (a, b) in ours.iter().zip(&oracle) {
            assert!(
                ((a - b) / b).abs() < 1e-12,
                "implementation {a} vs brute force {b}"
            );
        }
    }

    #[test]
    fn white_noise_profile_snippet_variance_level() {
        // Monte-Carlo reference for τ = 16, m = 1, computed with the
        // independent brute-force fit: the mean detrended variance of a
        // unit-noise profile sits near (τ² − 4)/(15 τ) ≈ 1.05.
        let mut impl_sum = 0.0;
        let mut oracle_sum = 0.0;
        let mut count = 0usize;
        for seed in 0..50u64 {
            let noise = generate(&GeneratorSpec::new(Kind::WhiteNoise, 1024, 500 + seed)).unwrap();
            let p = profile(&noise).unwrap();
            let vars = segment_variances(&p, 16, 1, false).unwrap();
            let oracle = brute_force_dfa1(p.values(), 16);
            impl_sum += vars.iter().sum::<f64>();
            oracle_sum += oracle.iter().sum::<f64>();
            count += vars.len();
        }
        let impl_mean = impl_sum / count as f64;
        let oracle_mean = oracle_sum / count as f64;
        assert!(
            (impl_mean - oracle_mean).abs() < 1e-10,
            "implementation {impl_mean} vs oracle {oracle_mean}"
        );
        assert!(
            impl_mean > 0.8 && impl_mean < 1.4,
            "mean snippet variance {impl_mean} outside the Monte-Carlo bracket"
        );
    }

    #[test]
    fn fluctuation_of_equal_variances_is_sqrt() {
        let sizes = [8usize, 16];
        let vars = vec![vec![4.0; 10], vec![4.0; 5]];
        let qs = [-2.0, 0.0, 2.0, 4.0];
        let surface = fluctuation_function(&sizes, &vars, &qs, 1, "flat").unwrap();
        for qi in 0..qs.len() {
            for ti in 0..sizes.len() {
                assert!((surface.value(qi, ti) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fluctuation_two_point_power_mean() {
        let surface =
            fluctuation_function(&[8], &[vec![1.0, 4.0]], &[2.0], 1, "two").unwrap();
        assert!((surface.value(0, 0) - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_rejected_for_nonpositive_q() {
        let vars = vec![vec![0.0, 1.0]];
        assert!(matches!(
            fluctuation_function(&[8], &vars, &[-2.0], 1, "z"),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(matches!(
            fluctuation_function(&[8], &vars, &[0.0], 1, "z"),
            Err(Error::DegenerateVariance(_))
        ));
        // Positive q tolerates isolated zero variances.
        assert!(fluctuation_function(&[8], &vars, &[2.0], 1, "z").is_ok());
    }

    fn exact_power_surface(exponent: f64) -> FluctuationSurface {
        let sizes: Vec<usize> = vec![4, 6, 8, 12, 16, 24, 32, 48, 64];
        let vars: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&t| vec![(t as f64).powf(2.0 * exponent); 4])
            .collect();
        fluctuation_function(&sizes, &vars, &[2.0], 1, "power").unwrap()
    }

    #[test]
    fn fit_scaling_recovers_exact_power_law() {
        let surface = exact_power_surface(0.6);
        let fit = fit_scaling(&surface, 2.0, (4, 64)).unwrap();
        assert!((fit.slope - 0.6).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(matches!(
            fit_scaling(&surface, 2.0, (4, 6)),
            Err(Error::InsufficientRange(_))
        ));
        assert!(fit_scaling(&surface, 3.0, (4, 64)).is_err());
    }

    #[test]
    fn hurst_distribution_zero_width_for_exact_power_law() {
        let surface = exact_power_surface(0.6);
        let dist = hurst_distribution(&surface, (4, 64), 3).unwrap();
        assert!((dist.median - 0.6).abs() < 1e-10);
        assert!((dist.q1 - 0.6).abs() < 1e-10);
        assert!((dist.q3 - 0.6).abs() < 1e-10);
        assert!(dist.outliers.is_empty());
        assert!(dist.std < 1e-10);
        let expected_windows: usize = (3..=9).map(|w| 9 - w + 1).sum();
        assert_eq!(dist.estimates.len(), expected_windows);
    }

    #[test]
    fn hurst_distribution_ordering_invariant() {
        let noise = generate(&GeneratorSpec::new(Kind::Fgn, 1 << 14, 3).with_hurst(0.6)).unwrap();
        let surface = analyze(&noise, &MfdfaConfig::default_for(noise.len(), 1).unwrap()).unwrap();
        let dist = hurst_distribution(&surface, (8, 256), 3).unwrap();
        assert!(dist.whisker_low <= dist.q1);
        assert!(dist.q1 <= dist.median);
        assert!(dist.median <= dist.q3);
        assert!(dist.q3 <= dist.whisker_high);
        assert!(!dist.estimates.is_empty());
    }

    #[test]
    fn fgn_distribution_concentrates_near_target() {
        let noise = generate(&GeneratorSpec::new(Kind::Fgn, 1 << 16, 23).with_hurst(0.7)).unwrap();
        let surface = analyze(&noise, &MfdfaConfig::default_for(noise.len(), 1).unwrap()).unwrap();
        let dist = hurst_distribution(&surface, (8, 256), 3).unwrap();
        assert!(
            (dist.median - 0.7).abs() < 0.05,
            "median {} should sit near 0.7",
            dist.median
        );
        assert!(dist.q3 - dist.q1 < 0.1, "IQR {}", dist.q3 - dist.q1);
    }

    #[test]
    fn structure_scaling_fit() {
        use crate::series::structure_function;
        // Brownian path: S_2(tau) = sigma^2 tau, so the fitted exponent is 1.
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 15, 31)).unwrap();
        let lags: Vec<usize> = vec![4, 8, 16, 32, 64, 128];
        let table = structure_function(&x, &lags, &[1, 2, 3]).unwrap();
        let fit = fit_structure_scaling(&table, 2, (4, 128)).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1, "xi(2) = {}", fit.slope);

        // Odd orders stay signed: a falling ramp has S_1(tau) = -c tau < 0,
        // which cannot be log-fitted.
        let ramp = ts((0..256).map(|i| -2.0 * i as f64).collect());
        let table = structure_function(&ramp, &lags, &[1]).unwrap();
        assert!(table.row(1).unwrap().iter().all(|&s| s < 0.0));
        assert!(matches!(
            fit_structure_scaling(&table, 1, (4, 128)),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(fit_structure_scaling(&table, 5, (4, 128)).is_err());
    }

    #[test]
    fn band_too_narrow_is_rejected() {
        let surface = exact_power_surface(0.5);
        assert!(matches!(
            hurst_distribution(&surface, (4, 8), 3),
            Err(Error::InsufficientRange(_))
        ));
    }

    #[test]
    fn white_noise_hurst_half() {
        let noise = generate(&GeneratorSpec::new(Kind::WhiteNoise, 1 << 16, 41)).unwrap();
        let config = MfdfaConfig::default_for(noise.len(), 1).unwrap();
        let surface = analyze(&noise, &config).unwrap();
        let fit = fit_scaling(&surface, 2.0, (8, 256)).unwrap();
        assert!(
            (fit.slope - 0.5).abs() < 0.05,
            "white noise h(2) = {}",
            fit.slope
        );
    }

    #[test]
    fn fgn_hurst_recovery_spot_checks() {
        for &(h, seed) in &[(0.7, 1u64), (0.3, 2u64)] {
            let noise =
                generate(&GeneratorSpec::new(Kind::Fgn, 1 << 16, seed).with_hurst(h)).unwrap();
            let config = MfdfaConfig::default_for(noise.len(), 1).unwrap();
            let surface = analyze(&noise, &config).unwrap();
            let fit = fit_scaling(&surface, 2.0, (8, 256)).unwrap();
            assert!(
                (fit.slope - h).abs() < 0.05,
                "H={h}: estimated {}",
                fit.slope
            );
        }
    }

    #[test]
    fn slopes_invariant_under_amplitude_scaling() {
        let noise = generate(&GeneratorSpec::new(Kind::Fgn, 1 << 13, 11).with_hurst(0.65)).unwrap();
        let scaled = ts(noise.values().iter().map(|v| v * 7.25).collect());
        let config = MfdfaConfig::new(
            default_snippet_sizes(noise.len(), 1).unwrap(),
            vec![-2.0, 2.0],
            1,
            true,
        )
        .unwrap();
        let s1 = analyze(&noise, &config).unwrap();
        let s2 = analyze(&scaled, &config).unwrap();
        for &q in &[-2.0, 2.0] {
            let f1 = fit_scaling(&s1, q, (8, 256)).unwrap();
            let f2 = fit_scaling(&s2, q, (8, 256)).unwrap();
            assert!(
                (f1.slope - f2.slope).abs() < 1e-9,
                "q={q}: slope moved by {}",
                (f1.slope - f2.slope).abs()
            );
        }
    }

    #[test]
    fn monofractal_slopes_agree_across_q() {
        let noise = generate(&GeneratorSpec::new(Kind::Fgn, 1 << 16, 19).with_hurst(0.6)).unwrap();
        let config = MfdfaConfig::new(
            default_snippet_sizes(noise.len(), 1).unwrap(),
            vec![-4.0, -2.0, 2.0, 4.0],
            1,
            true,
        )
        .unwrap();
        let surface = analyze(&noise, &config).unwrap();
        let h2 = fit_scaling(&surface, 2.0, (8, 256)).unwrap().slope;
        for &q in &[-4.0, -2.0, 4.0] {
            let hq = fit_scaling(&surface, q, (8, 256)).unwrap().slope;
            assert!(
                (hq - h2).abs() < 0.05,
                "h({q}) = {hq} vs h(2) = {h2}"
            );
        }
    }

    #[test]
    fn config_validation() {
        assert!(MfdfaConfig::new(vec![4, 8], vec![2.0], 0, true).is_err());
        assert!(MfdfaConfig::new(vec![8, 4], vec![2.0], 1, true).is_err());
        assert!(MfdfaConfig::new(vec![3, 8], vec![2.0], 2, true).is_err());
        assert!(MfdfaConfig::new(vec![4, 8], vec![], 1, true).is_err());
        // max snippet above len/4 is rejected at analysis time.
        let config = MfdfaConfig::new(vec![4, 8, 16], vec![2.0], 1, true).unwrap();
        let x = ts((0..32).map(|i| i as f64).collect());
        assert!(analyze(&x, &config).is_err());
    }
}

//! Kramers–Moyal description of increment statistics in scale.
//!
//! The increments Δx_τ(t) of a series, indexed by the lag τ, are treated as
//! a stochastic process in the scale variable. Conditional moments of the
//! scale steps are estimated with a Nadaraya–Watson regression (Epanechnikov
//! kernel) on a fixed grid of increment values, and the difference quotient
//! over the smallest available lags approximates the scale derivative.
//!
//! The drift is taken as the symmetric difference between the downward and
//! upward scale steps around an interior lag: the one-sided quotient at the
//! two smallest lags is degenerate for self-similar processes (the
//! conditional mean of Δx_τ given Δx_2τ equals Δx_2τ/2 for every Hurst
//! exponent), while the symmetric form cancels the bridge term and recovers
//! D_1 = −H·Δx/τ for all 0 < H < 1. The diffusion uses the conditional
//! variance of the step, which removes the squared-drift contamination of
//! the raw second moment at finite lag spacing.

use crate::error::{Error, Result};
use crate::series::{make_increments, IncrementSeries, TimeSeries};

/// Default minimum effective kernel weight for a grid bin to enter fits.
pub const DEFAULT_MIN_OCCUPANCY: f64 = 50.0;

/// Default grid size (odd, so the grid contains 0 exactly).
pub const DEFAULT_GRID_SIZE: usize = 101;

/// Increment series of one parent at a ladder of lags, smallest lag first.
#[derive(Debug, Clone)]
pub struct IncrementEnsemble {
    lags: Vec<usize>,
    series: Vec<IncrementSeries>,
}

impl IncrementEnsemble {
    /// Assemble an ensemble from pre-computed increment series (sorted,
    /// deduplicated by lag). The smallest lag must be 1 sample and every
    /// series must derive from the same parent.
    pub fn from_parts(mut series: Vec<IncrementSeries>) -> Result<Self> {
        series.sort_by_key(|s| s.lag());
        series.dedup_by_key(|s| s.lag());
        if series.is_empty() || series[0].lag() != 1 {
            return Err(Error::InvalidConfig(
                "ensemble must include the smallest lag, τ = 1 sample".into(),
            ));
        }
        let parent = series[0].parent_label().to_string();
        let interval = series[0].sample_interval();
        for s in &series[1..] {
            if s.parent_label() != parent || s.sample_interval() != interval {
                return Err(Error::InvalidConfig(format!(
                    "increment series at lag {} does not derive from parent '{parent}'",
                    s.lag()
                )));
            }
        }
        let lags = series.iter().map(|s| s.lag()).collect();
        Ok(Self { lags, series })
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn series_at(&self, lag: usize) -> Option<&IncrementSeries> {
        self.lags
            .iter()
            .position(|&l| l == lag)
            .map(|i| &self.series[i])
    }

    pub fn series(&self) -> &[IncrementSeries] {
        &self.series
    }
}

/// One increment series per requested lag, all derived from `x`.
pub fn build_ensemble(x: &TimeSeries, lags: &[usize]) -> Result<IncrementEnsemble> {
    if !lags.contains(&1) {
        return Err(Error::InvalidConfig(
            "lag list must include the smallest lag, τ = 1 sample".into(),
        ));
    }
    let mut sorted: Vec<usize> = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let max = *sorted.last().unwrap();
    if max >= x.len() / 4 {
        return Err(Error::InvalidConfig(format!(
            "largest lag {max} must stay below length/4 = {}",
            x.len() / 4
        )));
    }
    let series = sorted
        .iter()
        .map(|&lag| make_increments(x, lag))
        .collect::<Result<Vec<_>>>()?;
    IncrementEnsemble::from_parts(series)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman-style rule on the τ = 1 increment sample:
    /// 1.06 · std · N^{−1/5}.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct KmConfig {
    /// Highest coefficient order to estimate: 1 (drift) or 2 (drift and
    /// diffusion).
    pub order: u8,
    pub bandwidth: Bandwidth,
    pub grid_size: usize,
    pub min_occupancy: f64,
}

impl Default for KmConfig {
    fn default() -> Self {
        Self {
            order: 2,
            bandwidth: Bandwidth::Auto,
            grid_size: DEFAULT_GRID_SIZE,
            min_occupancy: DEFAULT_MIN_OCCUPANCY,
        }
    }
}

/// Kernel-regression estimates of D_1 (and optionally D_2) on a symmetric
/// grid of increment values, for every interior lag of the ensemble.
#[derive(Debug, Clone)]
pub struct KmCoefficientField {
    grid: Vec<f64>,
    lags: Vec<usize>,
    /// `d1[li][j]` = D_1(grid[j], lags[li]).
    d1: Vec<Vec<f64>>,
    d2: Option<Vec<Vec<f64>>>,
    d1_se: Vec<Vec<f64>>,
    counts: Vec<Vec<f64>>,
    usable: Vec<Vec<bool>>,
    bandwidth: f64,
    min_occupancy: f64,
}

impl KmCoefficientField {
    /// Build a field from raw parts, validating the grid and the diffusion
    /// sign on usable bins. Mostly useful for tests and deserialization.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: Vec<f64>,
        lags: Vec<usize>,
        d1: Vec<Vec<f64>>,
        d2: Option<Vec<Vec<f64>>>,
        d1_se: Vec<Vec<f64>>,
        counts: Vec<Vec<f64>>,
        usable: Vec<Vec<bool>>,
        bandwidth: f64,
        min_occupancy: f64,
    ) -> Result<Self> {
        if grid.len() < 3 || !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing with at least 3 points".into(),
            ));
        }
        let mid = grid.len() / 2;
        if grid.len() % 2 == 0 || grid[mid] != 0.0 {
            return Err(Error::InvalidArgument(
                "grid must be symmetric about 0 with an odd point count".into(),
            ));
        }
        if lags.is_empty() || d1.len() != lags.len() {
            return Err(Error::InvalidArgument("one D_1 row per lag required".into()));
        }
        if let Some(d2) = &d2 {
            for (li, row) in d2.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if usable[li][j] && v < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "negative diffusion D_2 = {v} on usable bin {j}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            grid,
            lags,
            d1,
            d2,
            d1_se,
            counts,
            usable,
            bandwidth,
            min_occupancy,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn min_occupancy(&self) -> f64 {
        self.min_occupancy
    }

    fn lag_index(&self, lag: usize) -> Option<usize> {
        self.lags.iter().position(|&l| l == lag)
    }

    pub fn d1_at(&self, lag: usize) -> Option<&[f64]> {
        self.lag_index(lag).map(|li| self.d1[li].as_slice())
    }

    pub fn d2_at(&self, lag: usize) -> Option<&[f64]> {
        let li = self.lag_index(lag)?;
        self.d2.as_ref().map(|d2| d2[li].as_slice())
    }

    pub fn d1_se_at(&self, lag: usize) -> Option<&[f64]> {
        self.lag_index(lag).map(|li| self.d1_se[li].as_slice())
    }

    pub fn counts_at(&self, lag: usize) -> Option<&[f64]> {
        self.lag_index(lag).map(|li| self.counts[li].as_slice())
    }

    pub fn usable_at(&self, lag: usize) -> Option<&[bool]> {
        self.lag_index(lag).map(|li| self.usable[li].as_slice())
    }

    pub fn has_diffusion(&self) -> bool {
        self.d2.is_some()
    }
}

/// Weighted-fit diagnostics for one coefficient.
#[derive(Debug, Clone, Copy)]
pub struct FitDiagnostics {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub usable_bins: usize,
}

/// Hurst estimate from the drift, with the diffusion-derived multifractality
/// constant when the field carries D_2. `raw_b` keeps the unclamped fit.
#[derive(Debug, Clone)]
pub struct KmHurstFit {
    pub hurst: f64,
    pub lag: usize,
    pub drift: FitDiagnostics,
    pub b: Option<f64>,
    pub raw_b: Option<f64>,
    pub diffusion: Option<FitDiagnostics>,
}

/// Diffusion fit: D_2(Δx) against Δx²/τ plus a constant offset.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionFit {
    pub b: f64,
    pub raw_coefficient: f64,
    pub offset: f64,
    pub residual_rms: f64,
    pub usable_bins: usize,
    pub lag: usize,
}

/// Estimate the Kramers–Moyal coefficients of the ensemble.
///
/// Requires the three smallest lags to be consecutive (τ−1, τ, τ+1, normally
/// 1, 2, 3) so the scale derivative can be formed symmetrically; estimates
/// are produced at every interior lag of the ensemble.
pub fn estimate_km(ens: &IncrementEnsemble, config: &KmConfig) -> Result<KmCoefficientField> {
    if !(1..=2).contains(&config.order) {
        return Err(Error::InvalidConfig(format!(
            "coefficient order must be 1 or 2, got {}",
            config.order
        )));
    }
    if config.grid_size < 11 || config.grid_size % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "grid size must be odd and at least 11, got {}",
            config.grid_size
        )));
    }
    if config.min_occupancy <= 0.0 {
        return Err(Error::InvalidConfig("minimum occupancy must be positive".into()));
    }
    let interior: Vec<usize> = ens
        .lags()
        .iter()
        .copied()
        .filter(|&tau| {
            tau > 1 && ens.lags().contains(&(tau - 1)) && ens.lags().contains(&(tau + 1))
        })
        .collect();
    if interior.is_empty() {
        return Err(Error::InvalidConfig(
            "ensemble needs three consecutive lags starting at the smallest \
             (e.g. {1, 2, 3}) to form the scale derivative"
            .into(),
        ));
    }

    let base = ens.series_at(1).expect("lag 1 present");
    let (sd, n1) = (std_dev(base.values()), base.len());
    if sd == 0.0 {
        return Err(Error::InsufficientData(
            "increments are constant; no kernel support".into(),
        ));
    }
    let bandwidth = match config.bandwidth {
        Bandwidth::Auto => 1.06 * sd * (n1 as f64).powf(-0.2),
        Bandwidth::Fixed(h) => {
            if h <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
            h
        }
    };

    // Symmetric grid over ±4 sample standard deviations of the τ=1 sample.
    let half = (config.grid_size - 1) / 2;
    let step = 4.0 * sd / half as f64;
    let grid: Vec<f64> = (0..config.grid_size)
        .map(|j| (j as f64 - half as f64) * step)
        .collect();

    let mut d1 = Vec::with_capacity(interior.len());
    let mut d2 = Vec::with_capacity(interior.len());
    let mut d1_se = Vec::with_capacity(interior.len());
    let mut counts = Vec::with_capacity(interior.len());
    let mut usable = Vec::with_capacity(interior.len());
    let mut any_usable = false;

    for &tau in &interior {
        let below = ens.series_at(tau - 1).unwrap().values();
        let here = ens.series_at(tau).unwrap().values();
        let above = ens.series_at(tau + 1).unwrap().values();
        let n = above.len().min(here.len()).min(below.len());

        let bins = regress_bins(&grid, step, bandwidth, &here[..n], &below[..n], &above[..n]);

        let mut d1_row = vec![f64::NAN; grid.len()];
        let mut d2_row = vec![f64::NAN; grid.len()];
        let mut se_row = vec![f64::NAN; grid.len()];
        let mut count_row = vec![0.0; grid.len()];
        let mut usable_row = vec![false; grid.len()];
        for (j, bin) in bins.into_iter().enumerate() {
            count_row[j] = bin.effective_count();
            if bin.weight_sum <= 0.0 {
                continue;
            }
            let mean_down = bin.down_sum / bin.weight_sum;
            let mean_up = bin.up_sum / bin.weight_sum;
            // Downward-cascade orientation: positive step toward smaller τ.
            d1_row[j] = 0.5 * (mean_down - mean_up);
            let var_down = (bin.down_sq_sum / bin.weight_sum - mean_down * mean_down).max(0.0);
            let var_up = (bin.up_sq_sum / bin.weight_sum - mean_up * mean_up).max(0.0);
            d2_row[j] = 0.25 * (var_down + var_up);
            let weight_ratio = bin.weight_sq_sum / (bin.weight_sum * bin.weight_sum);
            se_row[j] = 0.5 * ((var_down + var_up) * weight_ratio).sqrt();
            if count_row[j] >= config.min_occupancy {
                usable_row[j] = true;
                any_usable = true;
            }
        }
        d1.push(d1_row);
        d2.push(d2_row);
        d1_se.push(se_row);
        counts.push(count_row);
        usable.push(usable_row);
    }

    if !any_usable {
        return Err(Error::InsufficientData(format!(
            "no grid bin reaches the minimum occupancy of {}",
            config.min_occupancy
        )));
    }

    Ok(KmCoefficientField {
        grid,
        lags: interior,
        d1,
        d2: (config.order >= 2).then_some(d2),
        d1_se,
        counts,
        usable,
        bandwidth,
        min_occupancy: config.min_occupancy,
    })
}

#[derive(Default, Clone, Copy)]
struct BinAccumulator {
    weight_sum: f64,
    weight_sq_sum: f64,
    down_sum: f64,
    down_sq_sum: f64,
    up_sum: f64,
    up_sq_sum: f64,
}

impl BinAccumulator {
    /// Kernel weights normalized so a sample at the bin center counts as 1.
    fn effective_count(&self) -> f64 {
        self.weight_sum / 0.75
    }
}

/// Accumulate Epanechnikov-weighted step statistics per grid bin. The kernel
/// has compact support, so each sample touches only the bins within one
/// bandwidth of its conditioning value.
fn regress_bins(
    grid: &[f64],
    step: f64,
    bandwidth: f64,
    here: &[f64],
    below: &[f64],
    above: &[f64],
) -> Vec<BinAccumulator> {
    let mut bins = vec![BinAccumulator::default(); grid.len()];
    let g0 = grid[0];
    let last = grid.len() - 1;
    for t in 0..here.len() {
        let w = here[t];
        let down = below[t] - w;
        let up = above[t] - w;
        let lo = ((w - bandwidth - g0) / step).ceil().max(0.0) as usize;
        if lo > last {
            continue;
        }
        let hi = (((w + bandwidth - g0) / step).floor() as isize).min(last as isize);
        if hi < lo as isize {
            continue;
        }
        for j in lo..=hi as usize {
            let u = (w - grid[j]) / bandwidth;
            let k = 1.0 - u * u;
            if k <= 0.0 {
                continue;
            }
            let k = 0.75 * k;
            let bin = &mut bins[j];
            bin.weight_sum += k;
            bin.weight_sq_sum += k * k;
            bin.down_sum += k * down;
            bin.down_sq_sum += k * down * down;
            bin.up_sum += k * up;
            bin.up_sq_sum += k * up * up;
        }
    }
    bins
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Weighted least squares of y against x: returns (slope, intercept,
/// weighted residual RMS).
fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    let sy: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    let (mx, my) = (sx / sw, sy / sw);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..x.len())
        .map(|i| w[i] * (y[i] - slope * x[i] - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / sw).sqrt())
}

/// H from the drift at the smallest interior lag: weighted least squares of
/// D_1(Δx) against Δx over usable bins, H = −slope·τ.
pub fn hurst_from_drift(field: &KmCoefficientField) -> Result<KmHurstFit> {
    let lag = field.lags[0];
    let (xs, ys, ws) = usable_bins(field, lag, field.d1_at(lag).unwrap())?;
    let (slope, intercept, residual_rms) = weighted_linear_fit(&xs, &ys, &ws);
    let hurst = -slope * lag as f64;
    if !hurst.is_finite() {
        return Err(Error::InsufficientData("drift fit produced a non-finite H".into()));
    }
    let drift = FitDiagnostics {
        slope,
        intercept,
        residual_rms,
        usable_bins: xs.len(),
    };
    let (b, raw_b, diffusion) = if field.has_diffusion() {
        let fit = multifractal_b(field)?;
        (
            Some(fit.b),
            Some(fit.raw_coefficient),
            Some(FitDiagnostics {
                slope: fit.raw_coefficient,
                intercept: fit.offset,
                residual_rms: fit.residual_rms,
                usable_bins: fit.usable_bins,
            }),
        )
    } else {
        (None, None, None)
    };
    Ok(KmHurstFit {
        hurst,
        lag,
        drift,
        b,
        raw_b,
        diffusion,
    })
}

/// Multifractality constant from the diffusion: least squares of D_2(Δx)
/// against Δx²/τ plus an offset; b is clamped at 0 with the raw value kept.
pub fn multifractal_b(field: &KmCoefficientField) -> Result<DiffusionFit> {
    let lag = field.lags[0];
    let d2 = field
        .d2_at(lag)
        .ok_or_else(|| Error::InsufficientData("field carries no D_2 estimates".into()))?;
    let (xs, ys, ws) = usable_bins(field, lag, d2)?;
    let scaled: Vec<f64> = xs.iter().map(|&x| x * x / lag as f64).collect();
    let (slope, offset, residual_rms) = weighted_linear_fit(&scaled, &ys, &ws);
    Ok(DiffusionFit {
        b: slope.max(0.0),
        raw_coefficient: slope,
        offset,
        residual_rms,
        usable_bins: xs.len(),
        lag,
    })
}

fn usable_bins(
    field: &KmCoefficientField,
    lag: usize,
    values: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let usable = field.usable_at(lag).unwrap();
    let counts = field.counts_at(lag).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (j, &g) in field.grid().iter().enumerate() {
        if usable[j] && values[j].is_finite() {
            xs.push(g);
            ys.push(values[j]);
            ws.push(counts[j]);
        }
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "only {} usable bins, need at least 5",
            xs.len()
        )));
    }
    if !xs.iter().any(|&x| x < 0.0) || !xs.iter().any(|&x| x > 0.0) {
        return Err(Error::OneSidedSupport(
            "usable bins cover only one sign of Δx".into(),
        ));
    }
    Ok((xs, ys, ws))
}

/// ξ(n) = nH − bn(n−1) for each requested order.
pub fn xi_from_km(hurst: f64, b: f64, orders: &[u32]) -> Vec<f64> {
    orders
        .iter()
        .map(|&n| {
            let n = n as f64;
            n * hurst - b * n * (n - 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorSpec, Kind};
    use chrono::TimeDelta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ensemble_length_arithmetic() {
        let x = generate(&GeneratorSpec::new(Kind::WhiteNoise, 100, 1)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 4]).unwrap();
        assert_eq!(ens.lags(), &[1, 2, 4]);
        assert_eq!(ens.series_at(1).unwrap().len(), 99);
        assert_eq!(ens.series_at(2).unwrap().len(), 98);
        assert_eq!(ens.series_at(4).unwrap().len(), 96);
    }

    #[test]
    fn ensemble_requires_smallest_lag() {
        let x = generate(&GeneratorSpec::new(Kind::WhiteNoise, 100, 1)).unwrap();
        assert!(matches!(
            build_ensemble(&x, &[2, 4]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(build_ensemble(&x, &[1, 2, 25]).is_err());
    }

    #[test]
    fn ensemble_rejects_mixed_parents() {
        let dt = TimeDelta::hours(1);
        let a = IncrementSeries::from_parts(vec![1.0; 32], 1, "a", dt).unwrap();
        let b = IncrementSeries::from_parts(vec![1.0; 31], 2, "b", dt).unwrap();
        assert!(matches!(
            IncrementEnsemble::from_parts(vec![a, b]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn brownian_increment_variance_grows_linearly() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 15, 5)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 4, 8]).unwrap();
        let var1 = variance(ens.series_at(1).unwrap().values());
        for &lag in &[2usize, 4, 8] {
            let v = variance(ens.series_at(lag).unwrap().values());
            let ratio = v / (var1 * lag as f64);
            assert!(
                (ratio - 1.0).abs() < 0.1,
                "lag {lag}: variance ratio {ratio}"
            );
        }
    }

    fn variance(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    /// Synthetic ensemble with exact conditional structure: the conditioning
    /// increment is standard normal and both neighbors contract/expand by
    /// 25%, so the drift grid is exactly linear with slope −0.5/τ at τ = 2.
    fn bridge_style_ensemble(n: usize, seed: u64) -> IncrementEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Vec::with_capacity(n);
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for _ in 0..n {
            let v: f64 = rng.sample(StandardNormal);
            let e1: f64 = rng.sample(StandardNormal);
            let e3: f64 = rng.sample(StandardNormal);
            w.push(v);
            lo.push(0.75 * v + 0.05 * e1);
            hi.push(1.25 * v + 0.05 * e3);
        }
        let dt = TimeDelta::hours(1);
        IncrementEnsemble::from_parts(vec![
            IncrementSeries::from_parts(lo, 1, "bridge", dt).unwrap(),
            IncrementSeries::from_parts(w, 2, "bridge", dt).unwrap(),
            IncrementSeries::from_parts(hi, 3, "bridge", dt).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn drift_grid_linear_for_exact_construction() {
        let ens = bridge_style_ensemble(1 << 16, 42);
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let lag = field.lags()[0];
        assert_eq!(lag, 2);
        let fit = hurst_from_drift(&field).unwrap();
        let expected_slope = -0.5 / lag as f64;
        assert!(
            (fit.drift.slope / expected_slope - 1.0).abs() < 0.1,
            "drift slope {} vs expected {expected_slope}",
            fit.drift.slope
        );
        assert!((fit.hurst - 0.5).abs() < 0.05, "H = {}", fit.hurst);
    }

    #[test]
    fn brownian_path_drift_slope() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 16, 7)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let fit = hurst_from_drift(&field).unwrap();
        let expected = -0.5 / 2.0;
        assert!(
            (fit.drift.slope / expected - 1.0).abs() < 0.1,
            "slope {} vs {expected}",
            fit.drift.slope
        );
        assert!((fit.hurst - 0.5).abs() < 0.05);
    }

    #[test]
    fn symmetric_input_has_vanishing_drift_at_origin() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 16, 13)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let lag = field.lags()[0];
        let mid = field.grid().len() / 2;
        let d1 = field.d1_at(lag).unwrap()[mid];
        let se = field.d1_se_at(lag).unwrap()[mid];
        assert!(d1.abs() < 4.0 * se, "D_1(0) = {d1}, se = {se}");
    }

    #[test]
    fn fbm_path_recovers_hurst() {
        for &(h, seed) in &[(0.7, 3u64), (0.3, 4u64)] {
            let x = generate(&GeneratorSpec::new(Kind::FbmPath, 1 << 17, seed).with_hurst(h))
                .unwrap();
            let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
            let field = estimate_km(&ens, &KmConfig::default()).unwrap();
            let fit = hurst_from_drift(&field).unwrap();
            assert!(
                (fit.hurst - h).abs() < 0.1,
                "H_true = {h}, estimated {}",
                fit.hurst
            );
        }
    }

    #[test]
    fn fixed_bandwidth_and_coarse_grid_still_recover() {
        let x = generate(&GeneratorSpec::new(Kind::FbmPath, 1 << 16, 51).with_hurst(0.6)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let sd = variance(ens.series_at(1).unwrap().values()).sqrt();
        let config = KmConfig {
            bandwidth: Bandwidth::Fixed(0.25 * sd),
            grid_size: 51,
            ..KmConfig::default()
        };
        let field = estimate_km(&ens, &config).unwrap();
        assert_eq!(field.bandwidth(), 0.25 * sd);
        assert_eq!(field.grid().len(), 51);
        let fit = hurst_from_drift(&field).unwrap();
        assert!((fit.hurst - 0.6).abs() < 0.1, "H = {}", fit.hurst);
    }

    #[test]
    fn brownian_diffusion_is_flat() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 17, 29)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let fit = multifractal_b(&field).unwrap();
        assert!(fit.b < 0.01, "b = {} should vanish for Brownian input", fit.b);
        assert!(fit.offset > 0.0, "diffusion level should be positive");
    }

    #[test]
    fn diffusion_nonnegative_on_usable_bins() {
        let x =
            generate(&GeneratorSpec::new(Kind::FbmPath, 1 << 15, 31).with_hurst(0.7)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let lag = field.lags()[0];
        let d2 = field.d2_at(lag).unwrap();
        for (j, &u) in field.usable_at(lag).unwrap().iter().enumerate() {
            if u {
                assert!(d2[j] >= 0.0, "D_2 = {} at usable bin {j}", d2[j]);
            }
        }
    }

    #[test]
    fn drift_antisymmetry_within_standard_error() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 17, 37)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let field = estimate_km(&ens, &KmConfig::default()).unwrap();
        let lag = field.lags()[0];
        let grid = field.grid();
        let d1 = field.d1_at(lag).unwrap();
        let se = field.d1_se_at(lag).unwrap();
        let usable = field.usable_at(lag).unwrap();
        let mid = grid.len() / 2;
        for j in 0..mid {
            let mirror = grid.len() - 1 - j;
            if usable[j] && usable[mirror] {
                let asym = (d1[j] + d1[mirror]).abs();
                let bound = 3.0 * (se[j].powi(2) + se[mirror].powi(2)).sqrt();
                assert!(
                    asym <= bound,
                    "bin {j}: |D1(x)+D1(-x)| = {asym} > {bound}"
                );
            }
        }
    }

    #[test]
    fn field_invariant_under_constant_shift() {
        let x = generate(&GeneratorSpec::new(Kind::FbmPath, 1 << 14, 41).with_hurst(0.6)).unwrap();
        let shifted = x
            .with_values(x.values().iter().map(|v| v + 500.0).collect(), "shifted")
            .unwrap();
        let config = KmConfig::default();
        let f1 = estimate_km(&build_ensemble(&x, &[1, 2, 3]).unwrap(), &config).unwrap();
        let f2 = estimate_km(&build_ensemble(&shifted, &[1, 2, 3]).unwrap(), &config).unwrap();
        // The shift cancels in the increments up to the low mantissa bits
        // lost when 500 dominates the sum; the field must match to that
        // precision.
        for (a, b) in f1.grid().iter().zip(f2.grid()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in f1.d1_at(2).unwrap().iter().zip(f2.d1_at(2).unwrap()) {
            if a.is_nan() || b.is_nan() {
                assert_eq!(a.is_nan(), b.is_nan());
            } else {
                assert!((a - b).abs() < 1e-9, "D_1 moved from {a} to {b}");
            }
        }
    }

    #[test]
    fn hurst_invariant_under_amplitude_scaling() {
        let x = generate(&GeneratorSpec::new(Kind::FbmPath, 1 << 14, 43).with_hurst(0.7)).unwrap();
        let scaled = x
            .with_values(x.values().iter().map(|v| v * 3.5).collect(), "scaled")
            .unwrap();
        let config = KmConfig::default();
        let h1 = hurst_from_drift(
            &estimate_km(&build_ensemble(&x, &[1, 2, 3]).unwrap(), &config).unwrap(),
        )
        .unwrap()
        .hurst;
        let h2 = hurst_from_drift(
            &estimate_km(&build_ensemble(&scaled, &[1, 2, 3]).unwrap(), &config).unwrap(),
        )
        .unwrap()
        .hurst;
        assert!(
            (h1 - h2).abs() < 1e-9,
            "H moved from {h1} to {h2} under scaling"
        );
    }

    fn exact_field(d1_slope_per_tau: f64, d2_b: Option<f64>, offset: f64) -> KmCoefficientField {
        let lag = 2usize;
        let grid: Vec<f64> = (-5..=5).map(|i| i as f64 * 0.5).collect();
        let d1: Vec<f64> = grid
            .iter()
            .map(|&g| d1_slope_per_tau * g / lag as f64)
            .collect();
        let d2 = d2_b.map(|b| {
            vec![grid
                .iter()
                .map(|&g| b * g * g / lag as f64 + offset)
                .collect::<Vec<f64>>()]
        });
        let n = grid.len();
        KmCoefficientField::from_parts(
            grid,
            vec![lag],
            vec![d1],
            d2,
            vec![vec![0.0; n]],
            vec![vec![100.0; n]],
            vec![vec![true; n]],
            0.5,
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn exact_drift_field_inverts_to_hurst() {
        let field = exact_field(-0.7, None, 0.0);
        let fit = hurst_from_drift(&field).unwrap();
        assert!((fit.hurst - 0.7).abs() < 1e-12);
        assert!(fit.b.is_none());
    }

    #[test]
    fn exact_diffusion_field_inverts_to_b() {
        let field = exact_field(-0.5, Some(0.04), 0.0);
        let fit = multifractal_b(&field).unwrap();
        assert!((fit.b - 0.04).abs() < 1e-12);
        assert!(fit.offset.abs() < 1e-12);
    }

    #[test]
    fn constant_diffusion_field_gives_zero_b() {
        let field = exact_field(-0.5, Some(0.0), 3.25);
        let fit = multifractal_b(&field).unwrap();
        assert_eq!(fit.b, 0.0);
        assert!((fit.offset - 3.25).abs() < 1e-12);
    }

    #[test]
    fn negative_raw_b_is_clamped() {
        let lag = 2usize;
        let grid: Vec<f64> = (-5..=5).map(|i| i as f64 * 0.5).collect();
        let n = grid.len();
        let d1 = vec![0.0; n];
        let d2: Vec<f64> = grid.iter().map(|&g| 1.0 - 0.02 * g * g / lag as f64).collect();
        let field = KmCoefficientField::from_parts(
            grid,
            vec![lag],
            vec![d1],
            Some(vec![d2]),
            vec![vec![0.0; n]],
            vec![vec![100.0; n]],
            vec![vec![true; n]],
            0.5,
            50.0,
        )
        .unwrap();
        let fit = multifractal_b(&field).unwrap();
        assert_eq!(fit.b, 0.0);
        assert!((fit.raw_coefficient + 0.02).abs() < 1e-12);
    }

    #[test]
    fn one_sided_support_detected() {
        let lag = 2usize;
        let grid: Vec<f64> = (-5..=5).map(|i| i as f64 * 0.5).collect();
        let n = grid.len();
        let usable: Vec<bool> = grid.iter().map(|&g| g >= 0.0).collect();
        let field = KmCoefficientField::from_parts(
            grid.clone(),
            vec![lag],
            vec![vec![0.0; n]],
            None,
            vec![vec![0.0; n]],
            vec![vec![100.0; n]],
            vec![usable],
            0.5,
            50.0,
        )
        .unwrap();
        assert!(matches!(
            hurst_from_drift(&field),
            Err(Error::OneSidedSupport(_))
        ));
    }

    #[test]
    fn config_validation() {
        let x = generate(&GeneratorSpec::new(Kind::Brownian, 1 << 12, 3)).unwrap();
        let ens = build_ensemble(&x, &[1, 2, 3]).unwrap();
        let bad_bw = KmConfig {
            bandwidth: Bandwidth::Fixed(0.0),
            ..KmConfig::default()
        };
        assert!(estimate_km(&ens, &bad_bw).is_err());
        let bad_grid = KmConfig {
            grid_size: 10,
            ..KmConfig::default()
        };
        assert!(estimate_km(&ens, &bad_grid).is_err());
        let ens2 = build_ensemble(&x, &[1, 2]).unwrap();
        assert!(matches!(
            estimate_km(&ens2, &KmConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
        let ens3 = build_ensemble(&x, &[1, 2, 4]).unwrap();
        assert!(estimate_km(&ens3, &KmConfig::default()).is_err());
    }

    #[test]
    fn xi_from_km_closed_forms() {
        assert_eq!(xi_from_km(0.5, 0.0, &[2]), vec![1.0]);
        assert_eq!(xi_from_km(0.7, 0.0, &[1, 2, 3]), vec![0.7, 1.4, 2.0999999999999996]);
        let xi4 = xi_from_km(0.7, 0.05, &[4]);
        assert!((xi4[0] - 2.2).abs() < 1e-12);
    }
}

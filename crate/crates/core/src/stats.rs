//! Turning Monte Carlo samples into verdicts: two-sample KS distances,
//! log-log scaling fits, Hill tail indices and convergence-in-probability
//! trends.

use crate::error::{Error, Result};

/// Asymptotic two-sample KS coefficients `c(a)` at levels 5% and 1%.
pub const KS_COEFF_05: f64 = 1.358;
pub const KS_COEFF_01: f64 = 1.628;

/// Provenance of a sample set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleMeta {
    pub experiment: String,
    pub r: Option<f64>,
    pub t: Option<f64>,
    /// First and one-past-last replication index.
    pub seeds: (u64, u64),
}

/// Finite real samples with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    meta: SampleMeta,
}

impl SampleSet {
    /// Rejects non-finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_meta(values, SampleMeta::default())
    }

    pub fn with_meta(values: Vec<f64>, meta: SampleMeta) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { values, meta })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Two-sample KS statistic with its asymptotic critical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_05: f64,
    pub critical_01: f64,
    pub n: usize,
    pub m: usize,
}

impl KsResult {
    pub fn below_01(&self) -> bool {
        self.statistic < self.critical_01
    }

    pub fn below_05(&self) -> bool {
        self.statistic < self.critical_05
    }
}

/// `sup|F̂_a − F̂_b|` for two sample sets.
pub fn ks_distance(a: &SampleSet, b: &SampleSet) -> Result<KsResult> {
    ks_distance_values(a.values(), b.values())
}

/// As [`ks_distance`] on raw slices (NaN is rejected).
pub fn ks_distance_values(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sorted(a)?;
    let ys = sorted(b)?;
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] == v {
            i += 1;
        }
        while j < m && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let scale = ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    Ok(KsResult {
        statistic: d,
        critical_05: KS_COEFF_05 * scale,
        critical_01: KS_COEFF_01 * scale,
        n,
        m,
    })
}

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| x.is_nan()) {
        return Err(Error::NonFiniteSample(i));
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    Ok(s)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let s = sorted(values)?;
    Ok(quantile_sorted(&s, p))
}

fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Interquartile range `q_{0.75} − q_{0.25}`.
pub fn iqr(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let s = sorted(values)?;
    Ok(quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Pearson correlation of paired samples.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidParameter("correlation needs two paired samples of length ≥ 2".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Log-log fit of a dispersion statistic against the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub radii: Vec<f64>,
    pub statistics: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub predicted: Option<f64>,
    pub residuals: Vec<f64>,
}

impl ScalingReport {
    pub fn with_prediction(mut self, exponent: f64) -> Self {
        self.predicted = Some(exponent);
        self
    }

    /// `|slope − predicted| ≤ tol` (false without a prediction).
    pub fn within(&self, tol: f64) -> bool {
        self.predicted.is_some_and(|p| (self.slope - p).abs() <= tol)
    }
}

/// Slope of `log(statistic)` against `log(r)`.
pub fn scaling_exponent(radii: &[f64], statistics: &[f64]) -> Result<ScalingReport> {
    if radii.len() < 3 || radii.len() != statistics.len() {
        return Err(Error::InvalidParameter("scaling fit needs ≥ 3 radii with one statistic each".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|r| *r <= 0.0) {
        return Err(Error::InvalidParameter("radii must be positive and strictly decreasing".into()));
    }
    for (r, s) in radii.iter().zip(statistics) {
        if !(*s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveStatistic { radius: *r, value: *s });
        }
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = statistics.iter().map(|s| s.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let residuals = x.iter().zip(&y).map(|(a, b)| b - (slope * a + intercept)).collect();
    Ok(ScalingReport {
        radii: radii.to_vec(),
        statistics: statistics.to_vec(),
        slope,
        intercept,
        predicted: None,
        residuals,
    })
}

/// `d − (α−1)/α`, the self-similarity index of the normalized flux.
pub fn predicted_flux_exponent(d: usize, alpha: f64) -> f64 {
    d as f64 - (alpha - 1.0) / alpha
}

/// Hill estimate of the tail exponent of `|X|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub alpha: f64,
    pub std_error: f64,
    pub k: usize,
    /// Estimate at a 16 times deeper threshold, used for the light-tail flag.
    pub alpha_deep: f64,
    /// The estimate falls markedly as the threshold deepens: no power tail.
    pub light_tailed: bool,
}

impl TailEstimate {
    pub fn brackets(&self, lo: f64, hi: f64) -> bool {
        self.alpha >= lo && self.alpha <= hi
    }
}

/// Minimum sample size for [`tail_index`].
pub const TAIL_MIN_SAMPLES: usize = 1000;

/// Hill estimator on `|samples|` with `k = ⌊√N⌋` upper order statistics.
pub fn tail_index(samples: &[f64]) -> Result<TailEstimate> {
    let n = samples.len();
    if n < TAIL_MIN_SAMPLES {
        return Err(Error::TooFewExceedances(n));
    }
    let mut abs: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    if let Some(i) = abs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = (n as f64).sqrt().floor() as usize;
    let alpha = hill(&abs, k)?;
    let std_error = alpha / (k as f64).sqrt();
    let deep = (16 * k).min(n / 2);
    let alpha_deep = hill(&abs, deep)?;
    Ok(TailEstimate {
        alpha,
        std_error,
        k,
        alpha_deep,
        light_tailed: alpha - alpha_deep > 3.0 * std_error,
    })
}

fn hill(desc: &[f64], k: usize) -> Result<f64> {
    let threshold = desc[k];
    if threshold <= 0.0 {
        return Err(Error::TooFewExceedances(desc.iter().take_while(|v| **v > 0.0).count()));
    }
    let lt = threshold.ln();
    let h = desc[..k].iter().map(|v| v.ln() - lt).sum::<f64>() / k as f64;
    if h <= 0.0 {
        return Err(Error::TooFewExceedances(0));
    }
    Ok(1.0 / h)
}

/// Exceedance fractions per radius and the monotone-trend verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub fractions: Vec<f64>,
    /// Increases between consecutive radii, each tagged with whether it lies
    /// within binomial noise.
    pub inversions: Vec<(usize, bool)>,
    pub pass: bool,
}

/// Final exceedance fraction required for a passing trend.
pub const TREND_FINAL_FRACTION: f64 = 0.1;

/// Fractions of `|deviation| > δ` per radius (radii in decreasing order).
/// Passes when the fractions do not increase, up to one increase within two
/// binomial standard errors, and the last fraction is below 0.1.
pub fn convergence_in_probability_trend(deviations: &[Vec<f64>], delta: f64) -> Result<TrendReport> {
    if deviations.len() < 3 {
        return Err(Error::InvalidParameter("trend test needs ≥ 3 radii".into()));
    }
    if deviations.iter().any(|d| d.is_empty()) {
        return Err(Error::EmptySample);
    }
    let fractions: Vec<f64> = deviations
        .iter()
        .map(|d| d.iter().filter(|v| !(v.abs() <= delta)).count() as f64 / d.len() as f64)
        .collect();
    let mut inversions = Vec::new();
    for i in 1..fractions.len() {
        let (a, b) = (fractions[i - 1], fractions[i]);
        if b > a {
            let (na, nb) = (deviations[i - 1].len() as f64, deviations[i].len() as f64);
            let pooled = (a * na + b * nb) / (na + nb);
            let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
            inversions.push((i, b - a <= 2.0 * se));
        }
    }
    let tolerated = inversions.len() <= 1 && inversions.iter().all(|(_, noise)| *noise);
    let pass = tolerated && *fractions.last().unwrap() < TREND_FINAL_FRACTION;
    Ok(TrendReport {
        fractions,
        inversions,
        pass,
    })
}

//! Non-parametric forecast representations: bin distributions, quantile
//! forecasts, and sample distributions, plus the conversions between them
//! and the mixture representation.
//!
//! Bins are half-open `B_i = [b_{i-1}, b_i)` over a bounded range; the bin
//! CDF is the step function that includes the mass of the bin containing the
//! evaluation point. Quantile forecasts pair strictly increasing nominal
//! levels with nondecreasing values. Samples are possibly weighted draws.
//! All types are immutable and all operations pure.

use crate::distributions::{Component, DistError, Mixture};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RepError {
    #[error("bin edges must be strictly increasing (edge {index}: {prev} >= {next})")]
    EdgesNotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("expected {expected} probabilities for {edges} edges, got {got}")]
    BinCountMismatch {
        edges: usize,
        expected: usize,
        got: usize,
    },
    #[error("bin probabilities must be nonnegative (bin {index}: {value})")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("mixture mass on the bin range is {0}, too small to discretize")]
    MassDeficit(f64),
    #[error("quantile levels must be strictly increasing within (0, 1) (level {index}: {value})")]
    BadLevel { index: usize, value: f64 },
    #[error("quantile values must be nondecreasing (value {index}: {prev} > {next})")]
    ValuesNotMonotone { index: usize, prev: f64, next: f64 },
    #[error("level and value counts differ: {levels} vs {values}")]
    LevelCountMismatch { levels: usize, values: usize },
    #[error("sample must contain at least one draw")]
    EmptySample,
    #[error("sample contains a non-finite draw: {0}")]
    NonFiniteDraw(f64),
    #[error("sample weights invalid: {0}")]
    BadSampleWeights(String),
    #[error("degenerate sample: zero variance")]
    DegenerateSample,
    #[error("automatic bandwidth needs at least two draws")]
    TooFewDraws,
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// A bin distribution: probabilities assigned directly to contiguous
/// half-open bins `[b_{i-1}, b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinForecast {
    edges: Vec<f64>,
    probs: Vec<f64>,
}

impl BinForecast {
    /// `edges` are the `K+1` strictly increasing bin boundaries; `probs` the
    /// `K` bin probabilities, nonnegative and summing to 1 within `1e-6`.
    pub fn new(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self, RepError> {
        if edges.len() < 2 || probs.len() + 1 != edges.len() {
            return Err(RepError::BinCountMismatch {
                edges: edges.len(),
                expected: edges.len().saturating_sub(1),
                got: probs.len(),
            });
        }
        for (i, w) in edges.windows(2).enumerate() {
            if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(RepError::EdgesNotIncreasing {
                    index: i + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(RepError::NegativeProbability { index: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(RepError::ProbabilitySum(sum));
        }
        Ok(BinForecast { edges, probs })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Bin CDF: zero below the range, one at and above the last edge, and
    /// otherwise the cumulative mass through the bin containing `x`
    /// (inclusive), i.e. a right-continuous step at each bin's left edge.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[self.edges.len() - 1] {
            return 1.0;
        }
        // first bin whose lower edge lies beyond x marks the cut
        let n = self.edges[1..].partition_point(|&b| b <= x) + 1;
        self.probs[..n].iter().sum::<f64>().min(1.0)
    }

    /// Probability of the bin containing `x`, if `x` is inside the range.
    pub fn prob_of_bin_containing(&self, x: f64) -> Option<f64> {
        if x < self.edges[0] || x >= self.edges[self.edges.len() - 1] || x.is_nan() {
            return None;
        }
        let i = self.edges[1..].partition_point(|&b| b <= x);
        Some(self.probs[i])
    }

    /// Mass-weighted mean and standard deviation of the bin midpoints.
    pub fn midpoint_moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            mean += p * 0.5 * (self.edges[i] + self.edges[i + 1]);
        }
        let mut var = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            let mid = 0.5 * (self.edges[i] + self.edges[i + 1]);
            var += p * (mid - mean) * (mid - mean);
        }
        (mean, var.sqrt())
    }

    /// Inverse of the linearly interpolated cumulative mass, treating the
    /// mass within each bin as uniform. Used for scale-aware initialization.
    pub fn interpolated_quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let mut cum = 0.0;
        for (i, &pi) in self.probs.iter().enumerate() {
            if cum + pi >= p {
                if pi <= 0.0 {
                    return self.edges[i];
                }
                let frac = (p - cum) / pi;
                return self.edges[i] + frac * (self.edges[i + 1] - self.edges[i]);
            }
            cum += pi;
        }
        self.edges[self.edges.len() - 1]
    }
}

/// Discretizes a mixture onto the given bin edges: `p_i = F(b_i) - F(b_{i-1})`,
/// renormalized so the probabilities sum to exactly one.
///
/// The mixture must already hold essentially all of its mass on the bin
/// range (truncate first); residual mass beyond `1e-6` is an error, smaller
/// quadrature dust is redistributed proportionally.
pub fn discretize(m: &Mixture, edges: &[f64]) -> Result<BinForecast, RepError> {
    if edges.len() < 2 {
        return Err(RepError::BinCountMismatch {
            edges: edges.len(),
            expected: 1,
            got: 0,
        });
    }
    let mut probs: Vec<f64> = edges
        .windows(2)
        .map(|w| m.prob_between(w[0], w[1]))
        .collect();
    let total: f64 = probs.iter().sum();
    if total < 1.0 - 1e-6 {
        return Err(RepError::MassDeficit(total));
    }
    for p in &mut probs {
        *p /= total;
    }
    // pin the running sum to exactly one
    let head: f64 = probs[..probs.len() - 1].iter().sum();
    let last = probs.len() - 1;
    probs[last] = 1.0 - head;
    BinForecast::new(edges.to_vec(), probs)
}

/// A quantile forecast: strictly increasing nominal levels in `(0, 1)`
/// paired with nondecreasing values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    levels: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileForecast {
    pub fn new(levels: Vec<f64>, values: Vec<f64>) -> Result<Self, RepError> {
        if levels.len() != values.len() {
            return Err(RepError::LevelCountMismatch {
                levels: levels.len(),
                values: values.len(),
            });
        }
        let mut prev = 0.0;
        for (i, &l) in levels.iter().enumerate() {
            if !(l > prev && l < 1.0) || !l.is_finite() {
                return Err(RepError::BadLevel { index: i, value: l });
            }
            prev = l;
        }
        for (i, w) in values.windows(2).enumerate() {
            if !(w[0] <= w[1]) {
                return Err(RepError::ValuesNotMonotone {
                    index: i + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(RepError::NonFiniteDraw(v));
        }
        Ok(QuantileForecast { levels, values })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Linear interpolation of the (level, value) pairs at `p`, clamped to
    /// the end values outside the reported range.
    pub fn interpolate(&self, p: f64) -> f64 {
        if p <= self.levels[0] {
            return self.values[0];
        }
        if p >= self.levels[self.levels.len() - 1] {
            return self.values[self.values.len() - 1];
        }
        let i = self.levels.partition_point(|&l| l < p);
        let (l0, l1) = (self.levels[i - 1], self.levels[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (p - l0) / (l1 - l0) * (v1 - v0)
    }
}

/// A sample distribution: draws from some underlying forecast distribution,
/// optionally weighted (weights positive, summing to one).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleForecast {
    draws: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl SampleForecast {
    pub fn new(draws: Vec<f64>) -> Result<Self, RepError> {
        if draws.is_empty() {
            return Err(RepError::EmptySample);
        }
        if let Some(&bad) = draws.iter().find(|d| !d.is_finite()) {
            return Err(RepError::NonFiniteDraw(bad));
        }
        Ok(SampleForecast {
            draws,
            weights: None,
        })
    }

    pub fn new_weighted(draws: Vec<f64>, weights: Vec<f64>) -> Result<Self, RepError> {
        let s = Self::new(draws)?;
        if weights.len() != s.draws.len() {
            return Err(RepError::BadSampleWeights(format!(
                "{} weights for {} draws",
                weights.len(),
                s.draws.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(RepError::BadSampleWeights(
                "weights must be positive".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RepError::BadSampleWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(SampleForecast {
            draws: s.draws,
            weights: Some(weights),
        })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draws paired with their (uniform or explicit) weights, sorted by draw.
    pub(crate) fn sorted_weighted(&self) -> Vec<(f64, f64)> {
        let n = self.draws.len() as f64;
        let mut pairs: Vec<(f64, f64)> = match &self.weights {
            Some(ws) => self.draws.iter().copied().zip(ws.iter().copied()).collect(),
            None => self.draws.iter().map(|&d| (d, 1.0 / n)).collect(),
        };
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs
    }

    /// Empirical CDF: the (weighted) fraction of draws `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match &self.weights {
            None => {
                self.draws.iter().filter(|&&d| d <= x).count() as f64 / self.draws.len() as f64
            }
            Some(ws) => self
                .draws
                .iter()
                .zip(ws)
                .filter(|(&d, _)| d <= x)
                .map(|(_, &w)| w)
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.weights {
            None => self.draws.iter().sum::<f64>() / self.draws.len() as f64,
            Some(ws) => self.draws.iter().zip(ws).map(|(&d, &w)| d * w).sum(),
        }
    }

    /// Sample standard deviation with the `n - 1` denominator (uniform
    /// weights); weighted samples use the weighted population form.
    pub fn sd(&self) -> f64 {
        let mean = self.mean();
        match &self.weights {
            None => {
                if self.draws.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = self.draws.iter().map(|&d| (d - mean) * (d - mean)).sum();
                (ss / (self.draws.len() - 1) as f64).sqrt()
            }
            Some(ws) => self
                .draws
                .iter()
                .zip(ws)
                .map(|(&d, &w)| w * (d - mean) * (d - mean))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Gaussian kernel density estimate at `x`. With no explicit bandwidth,
    /// uses `h = 0.9 · min(sd, IQR/1.34) · n^(-1/5)` (falling back to the
    /// sample sd when the IQR is zero), which needs at least two draws and
    /// positive variance.
    pub fn kernel_density(&self, x: f64, bandwidth: Option<f64>) -> Result<f64, RepError> {
        let h = match bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return Err(RepError::BadBandwidth(h)),
            None => {
                if self.draws.len() < 2 {
                    return Err(RepError::TooFewDraws);
                }
                let sd = self.sd();
                if !(sd > 0.0) {
                    return Err(RepError::DegenerateSample);
                }
                let q = self.quantiles(&[0.25, 0.75])?;
                let iqr = q.values()[1] - q.values()[0];
                let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
                0.9 * spread * (self.draws.len() as f64).powf(-0.2)
            }
        };
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let sum = match &self.weights {
            None => {
                self.draws
                    .iter()
                    .map(|&d| {
                        let z = (x - d) / h;
                        norm * (-0.5 * z * z).exp()
                    })
                    .sum::<f64>()
                    / self.draws.len() as f64
            }
            Some(ws) => self
                .draws
                .iter()
                .zip(ws)
                .map(|(&d, &w)| {
                    let z = (x - d) / h;
                    w * norm * (-0.5 * z * z).exp()
                })
                .sum(),
        };
        Ok(sum / h)
    }

    /// Gaussian approximation: the normal with the sample's empirical mean
    /// and standard deviation, as a single-component mixture.
    pub fn gaussian_approx(&self) -> Result<Mixture, RepError> {
        if self.draws.len() < 2 {
            return Err(RepError::TooFewDraws);
        }
        let sd = self.sd();
        if !(sd > 0.0) {
            return Err(RepError::DegenerateSample);
        }
        Ok(Mixture::new(vec![Component::norm(self.mean(), sd, 1.0)?])?)
    }

    /// Sample quantiles at the given levels using the linear-interpolation
    /// convention (type 7). Weighted samples fall back to the generalized
    /// inverse of the weighted ECDF.
    pub fn quantiles(&self, levels: &[f64]) -> Result<QuantileForecast, RepError> {
        let sorted = self.sorted_weighted();
        let mut values = Vec::with_capacity(levels.len());
        match &self.weights {
            None => {
                let xs: Vec<f64> = sorted.iter().map(|&(d, _)| d).collect();
                let n = xs.len();
                for &p in levels {
                    let h = (n as f64 - 1.0) * p;
                    let lo = h.floor() as usize;
                    let hi = (lo + 1).min(n - 1);
                    values.push(xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo]));
                }
            }
            Some(_) => {
                for &p in levels {
                    let mut cum = 0.0;
                    let mut v = sorted[sorted.len() - 1].0;
                    for &(d, w) in &sorted {
                        cum += w;
                        if cum >= p {
                            v = d;
                            break;
                        }
                    }
                    values.push(v);
                }
            }
        }
        QuantileForecast::new(levels.to_vec(), values)
    }
}

/// Quantile forecast read off a mixture at the given levels, by inverting
/// the mixture CDF.
pub fn mixture_quantiles(m: &Mixture, levels: &[f64]) -> Result<QuantileForecast, RepError> {
    let mut values = Vec::with_capacity(levels.len());
    for &p in levels {
        values.push(m.quantile(p)?);
    }
    // Bisection round-off can leave microscopic inversions on flat CDFs.
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    QuantileForecast::new(levels.to_vec(), values)
}

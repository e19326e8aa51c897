//! Fitting normal mixtures to bin, quantile, and sample forecasts.
//!
//! Bin and quantile fits use a `C`-component normal mixture with ordered
//! means, a single shared standard deviation, and softmax weights. The
//! constrained parameters are optimized through the unconstrained vector
//! `γ = (μ₁, α₁..α_{C-1}, η, ν₂..ν_C)` where `μ_c = μ_{c-1} + e^{α_{c-1}}`,
//! `σ = e^η`, and `ω_i = e^{ν_i} / Σ e^{ν_j}` with `ν₁ ≡ 0`.
//!
//! The optimizer is block coordinate descent: each outer step minimizes the
//! objective over every coordinate separately (holding the others at their
//! incumbent values), then accepts the single coordinate update with the
//! lowest objective. Iteration stops when the relative objective change
//! drops below `rel_tol` or the outer budget runs out.
//!
//! The bin objective is the Kullback-Leibler divergence between the bin
//! probabilities and the mixture's bin masses; the quantile objective is the
//! sum of squared probability-scale residuals. Sample fits use standard EM
//! with a free standard deviation per component.

use crate::distributions::{stable_interval_mass, Component, DistError, Mixture};
use crate::representations::{BinForecast, QuantileForecast, RepError, SampleForecast};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("component count must be >= 1")]
    ZeroComponents,
    #[error("rel_tol must be > 0, got {0}")]
    BadRelTol(f64),
    #[error("only the shared-sigma parameterization is supported for bin and quantile fits")]
    UnsupportedSigmaMode,
    #[error("fit needs more than {need} nonzero bins, got {got}")]
    TooFewBins { need: usize, got: usize },
    #[error("fit needs at least {need} quantiles for {c} components, got {got}")]
    TooFewQuantiles { need: usize, got: usize, c: usize },
    #[error("sample fit needs more than {need} draws for {c} components, got {got}")]
    TooFewDraws { need: usize, got: usize, c: usize },
    #[error("objective is not finite at the initial parameters")]
    NonFiniteInit,
    #[error("parameters invalid: {0}")]
    BadParams(String),
    #[error("every EM restart collapsed to a degenerate component")]
    DegenerateFit,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Rep(#[from] RepError),
}

/// Settings for the bin and quantile fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of normal components, `C >= 1`.
    pub components: usize,
    /// One standard deviation shared by all components. The optimizer's
    /// parameter vector has no per-component scale, so `false` is rejected.
    pub shared_sigma: bool,
    /// Relative objective-change stopping criterion.
    pub rel_tol: f64,
    /// Outer iteration budget.
    pub max_outer_iter: usize,
    /// Golden-section iteration budget per coordinate minimization.
    pub coord_budget: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            components: 1,
            shared_sigma: true,
            rel_tol: 1e-3,
            max_outer_iter: 500,
            coord_budget: 64,
        }
    }
}

impl FitConfig {
    pub fn with_components(components: usize) -> Self {
        FitConfig {
            components,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.components == 0 {
            return Err(FitError::ZeroComponents);
        }
        if !(self.rel_tol > 0.0) {
            return Err(FitError::BadRelTol(self.rel_tol));
        }
        if !self.shared_sigma {
            return Err(FitError::UnsupportedSigmaMode);
        }
        Ok(())
    }
}

/// Unconstrained parameter vector of the shared-sigma normal mixture.
///
/// Decoding always satisfies the constraints: means strictly increasing,
/// `σ > 0`, weights positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    /// Smallest mean.
    pub mu1: f64,
    /// Log-gaps between consecutive means (`C - 1` entries).
    pub alpha: Vec<f64>,
    /// Log of the shared standard deviation.
    pub eta: f64,
    /// Softmax weight logits for components `2..C` (`ν₁ ≡ 0`).
    pub nu: Vec<f64>,
}

/// Constrained parameters decoded from a [`FitParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedParams {
    pub means: Vec<f64>,
    pub sigma: f64,
    pub weights: Vec<f64>,
}

impl FitParams {
    pub fn new(mu1: f64, alpha: Vec<f64>, eta: f64, nu: Vec<f64>) -> Result<Self, FitError> {
        if alpha.len() != nu.len() {
            return Err(FitError::BadParams(format!(
                "{} mean gaps vs {} weight logits",
                alpha.len(),
                nu.len()
            )));
        }
        let all_finite = mu1.is_finite()
            && eta.is_finite()
            && alpha.iter().all(|a| a.is_finite())
            && nu.iter().all(|n| n.is_finite());
        if !all_finite {
            return Err(FitError::BadParams("non-finite entry".into()));
        }
        Ok(FitParams {
            mu1,
            alpha,
            eta,
            nu,
        })
    }

    pub fn components(&self) -> usize {
        self.alpha.len() + 1
    }

    pub fn decode(&self) -> DecodedParams {
        let c = self.components();
        let mut means = Vec::with_capacity(c);
        means.push(self.mu1);
        for &a in &self.alpha {
            means.push(means.last().unwrap() + a.exp());
        }
        let sigma = self.eta.exp();
        let mut weights = Vec::with_capacity(c);
        let mut denom = 1.0;
        for &n in &self.nu {
            denom += n.exp();
        }
        weights.push(1.0 / denom);
        for &n in &self.nu {
            weights.push(n.exp() / denom);
        }
        DecodedParams {
            means,
            sigma,
            weights,
        }
    }

    /// Inverse of [`decode`](Self::decode): means must be strictly
    /// increasing, `sigma` positive, weights positive (they are normalized
    /// here).
    pub fn encode(means: &[f64], sigma: f64, weights: &[f64]) -> Result<Self, FitError> {
        if means.is_empty() || means.len() != weights.len() {
            return Err(FitError::BadParams(
                "means and weights must be nonempty and the same length".into(),
            ));
        }
        if !(sigma > 0.0) {
            return Err(FitError::BadParams(format!("sigma {sigma} must be > 0")));
        }
        let mut alpha = Vec::with_capacity(means.len() - 1);
        for w in means.windows(2) {
            if !(w[1] > w[0]) {
                return Err(FitError::BadParams(format!(
                    "means not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
            alpha.push((w[1] - w[0]).ln());
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w > 0.0)) || !(total > 0.0) {
            return Err(FitError::BadParams("weights must be positive".into()));
        }
        let nu = weights[1..]
            .iter()
            .map(|&w| (w / weights[0]).ln())
            .collect();
        FitParams::new(means[0], alpha, sigma.ln(), nu)
    }

    /// The fitted mixture this parameter vector describes. The decoded
    /// softmax weights are kept bit-for-bit (they sum to one well within
    /// the construction tolerance), so objectives evaluated on this mixture
    /// reproduce the optimizer's internal values.
    pub fn to_mixture(&self) -> Result<Mixture, FitError> {
        let d = self.decode();
        let comps = d
            .means
            .iter()
            .zip(&d.weights)
            .map(|(&m, &w)| Component::norm(m, d.sigma, w.min(1.0)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mixture::new(comps)?)
    }

    /// Nested extension for warm starts: one extra component appended past
    /// the largest mean with negligible weight, so the decoded mixture (and
    /// any objective) is essentially unchanged.
    pub fn with_extra_component(&self) -> FitParams {
        let d = self.decode();
        let mut alpha = self.alpha.clone();
        alpha.push(d.sigma.max(1e-6).ln());
        let mut nu = self.nu.clone();
        nu.push(-30.0 + self.nu.iter().cloned().fold(0.0f64, f64::max));
        FitParams {
            mu1: self.mu1,
            alpha,
            eta: self.eta,
            nu,
        }
    }

    /// Warm start that actually engages the new component: inserted at
    /// `location` (nudged off any existing mean) carrying `weight`, with the
    /// old weights scaled down to make room. `None` if no collision-free
    /// insertion point exists.
    pub fn with_component_at(&self, location: f64, weight: f64) -> Option<FitParams> {
        let d = self.decode();
        let scale = d.sigma.max(1e-9);
        let mut loc = location;
        for _ in 0..16 {
            if d.means
                .iter()
                .all(|&m| (loc - m).abs() > 1e-6 * scale.max(m.abs()))
            {
                break;
            }
            loc += 0.05 * scale;
        }
        let mut entries: Vec<(f64, f64)> = d
            .means
            .iter()
            .zip(&d.weights)
            .map(|(&m, &w)| (m, w * (1.0 - weight)))
            .collect();
        entries.push((loc, weight));
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let means: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let weights: Vec<f64> = entries.iter().map(|e| e.1).collect();
        FitParams::encode(&means, d.sigma, &weights).ok()
    }

    fn len(&self) -> usize {
        2 * self.components()
    }

    /// Coordinate order: `(μ₁, α₁..α_{C-1}, η, ν₂..ν_C)`.
    fn get(&self, i: usize) -> f64 {
        let c = self.components();
        if i == 0 {
            self.mu1
        } else if i < c {
            self.alpha[i - 1]
        } else if i == c {
            self.eta
        } else {
            self.nu[i - c - 1]
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let c = self.components();
        if i == 0 {
            self.mu1 = v;
        } else if i < c {
            self.alpha[i - 1] = v;
        } else if i == c {
            self.eta = v;
        } else {
            self.nu[i - c - 1] = v;
        }
    }

    /// Location coordinates move on the data scale; the rest are logs or
    /// logits and move in natural units.
    fn is_location(&self, i: usize) -> bool {
        i == 0
    }
}

/// Outcome of a fit: the mixture, the parameter vector (absent for EM fits,
/// whose per-component sigmas this encoding cannot express), the objective
/// value after every outer iteration, and whether the stopping criterion was
/// met within the budget.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub fitted: Mixture,
    pub params: Option<FitParams>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace always holds the initial objective")
    }
}

/// Kullback-Leibler divergence between a bin forecast and a mixture:
/// `Σ_i p_i log(p_i / P(m ∈ B_i))` over the bins with `p_i > 0`.
///
/// Returns `+∞` when the mixture puts zero mass on a bin the forecast
/// weights, which makes the sentinel safe to minimize through.
pub fn kld(f: &BinForecast, m: &Mixture) -> f64 {
    let edges = f.edges();
    let mut total = 0.0;
    for (i, &p) in f.probs().iter().enumerate() {
        if p > 0.0 {
            let mass = m.prob_between(edges[i], edges[i + 1]);
            if mass > 0.0 {
                total += p * (p / mass).ln();
            } else {
                return f64::INFINITY;
            }
        }
    }
    total
}

/// Sum of squared probability-scale residuals between a quantile forecast
/// and a mixture CDF: `Σ_i (α_i - F(q_i))²`.
pub fn ss_quantiles(q: &QuantileForecast, m: &Mixture) -> f64 {
    q.levels()
        .iter()
        .zip(q.values())
        .map(|(&l, &v)| {
            let r = l - m.cdf(v);
            r * r
        })
        .sum()
}

/// Internal objective over decoded shared-sigma normal mixture parameters.
///
/// Both objectives factor as "per-component columns" combined across
/// components with the mixture weights, and they use the same normal CDF
/// as `Mixture` evaluation, so reported objectives agree exactly with
/// [`kld`]/[`ss_quantiles`] on the fitted mixture. The column split lets
/// the coordinate loop cache the components a coordinate move leaves
/// untouched: weight logits touch none, the gap `alpha_j` only components
/// above `j`, while `mu1` and `eta` touch all of them.
trait Objective {
    /// Per-component cached values (CDFs at the evaluation points).
    fn fill_column(&self, mean: f64, sigma: f64, column: &mut [f64]);

    /// Values per component column.
    fn column_len(&self) -> usize;

    /// Combines the columns under the given weights into the objective.
    fn combine(&self, columns: &[Vec<f64>], weights: &[f64]) -> f64;
}

struct ColumnCache {
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    sigma: f64,
}

impl ColumnCache {
    fn new(obj: &impl Objective, d: &DecodedParams) -> Self {
        let mut cache = ColumnCache {
            columns: vec![vec![0.0; obj.column_len()]; d.means.len()],
            means: vec![f64::NAN; d.means.len()],
            sigma: f64::NAN,
        };
        cache.update(obj, d);
        cache
    }

    /// Refills only the columns whose mean or sigma changed.
    fn update(&mut self, obj: &impl Objective, d: &DecodedParams) {
        let sigma_changed = d.sigma != self.sigma;
        for (c, &mean) in d.means.iter().enumerate() {
            if sigma_changed || mean != self.means[c] {
                obj.fill_column(mean, d.sigma, &mut self.columns[c]);
                self.means[c] = mean;
            }
        }
        self.sigma = d.sigma;
    }

    fn eval(&mut self, obj: &impl Objective, d: &DecodedParams) -> f64 {
        self.update(obj, d);
        obj.combine(&self.columns, &d.weights)
    }
}

struct BinObjective<'a> {
    f: &'a BinForecast,
}

impl Objective for BinObjective<'_> {
    /// A column holds the CDF and survival values at every bin edge.
    fn column_len(&self) -> usize {
        2 * self.f.edges().len()
    }

    fn fill_column(&self, mean: f64, sigma: f64, column: &mut [f64]) {
        let n = Normal::new(mean, sigma).expect("validated params");
        let edges = self.f.edges();
        for (j, &edge) in edges.iter().enumerate() {
            column[2 * j] = n.cdf(edge);
            column[2 * j + 1] = n.sf(edge);
        }
    }

    /// The per-bin arithmetic mirrors `Component::prob_between` exactly, so
    /// reported objectives agree with [`kld`] on the fitted mixture to the
    /// last bit.
    fn combine(&self, columns: &[Vec<f64>], weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &p) in self.f.probs().iter().enumerate() {
            if p > 0.0 {
                let mut mass = 0.0;
                for (col, &w) in columns.iter().zip(weights) {
                    let raw = stable_interval_mass(
                        col[2 * i],
                        col[2 * i + 2],
                        col[2 * i + 1],
                        col[2 * i + 3],
                    );
                    mass += w * raw.clamp(0.0, 1.0);
                }
                if mass > 0.0 {
                    total += p * (p / mass).ln();
                } else {
                    return f64::INFINITY;
                }
            }
        }
        total
    }
}

struct QuantileObjective<'a> {
    q: &'a QuantileForecast,
}

impl Objective for QuantileObjective<'_> {
    fn column_len(&self) -> usize {
        self.q.len()
    }

    fn fill_column(&self, mean: f64, sigma: f64, column: &mut [f64]) {
        let n = Normal::new(mean, sigma).expect("validated params");
        for (j, &v) in self.q.values().iter().enumerate() {
            column[j] = n.cdf(v);
        }
    }

    fn combine(&self, columns: &[Vec<f64>], weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &l) in self.q.levels().iter().enumerate() {
            let mut cdf = 0.0;
            for (col, &w) in columns.iter().zip(weights) {
                cdf += w * col[i];
            }
            let r = l - cdf;
            total += r * r;
        }
        total
    }
}

/// Golden-section minimization over `[a, b]`; returns the best point found
/// and its value. The objective may return `+∞`.
fn golden_section(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, budget: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a, b);
    let mut h = b - a;
    let mut c = a + INVPHI2 * h;
    let mut d = a + INVPHI * h;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut used = 0;
    while h > tol && used < budget {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = a + INVPHI2 * h;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + INVPHI * h;
            fd = f(d);
        }
        used += 1;
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One-dimensional minimization around `center` with bracket `±half_width`,
/// expanding the bracket when the minimum lands on its edge.
fn minimize_coordinate(
    f: &mut impl FnMut(f64) -> f64,
    center: f64,
    half_width: f64,
    tol: f64,
    budget: usize,
) -> (f64, f64) {
    let mut hw = half_width;
    let mut best = (center, f64::INFINITY);
    for _ in 0..8 {
        let (x, fx) = golden_section(f, center - hw, center + hw, tol, budget);
        best = (x, fx);
        let margin = 0.02 * hw;
        if (x - (center - hw)).abs() > margin && ((center + hw) - x).abs() > margin {
            return best;
        }
        hw *= 2.0;
    }
    best
}

fn eval_params(obj: &impl Objective, cache: &mut ColumnCache, p: &FitParams) -> f64 {
    let v = cache.eval(obj, &p.decode());
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn run_block_coordinate_descent(
    obj: &impl Objective,
    init: FitParams,
    cfg: &FitConfig,
) -> Result<FitReport, FitError> {
    let mut params = init;
    let mut cache = ColumnCache::new(obj, &params.decode());
    let mut current = eval_params(obj, &mut cache, &params);
    if !current.is_finite() {
        return Err(FitError::NonFiniteInit);
    }
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_outer_iter {
        iterations += 1;
        let sigma = params.decode().sigma;
        // best single-coordinate update this sweep; ties keep the lowest
        // coordinate index because the comparison is strict
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..params.len() {
            let half_width = if params.is_location(i) {
                (4.0 * sigma).max(1e-6)
            } else {
                4.0
            };
            let incumbent = params.get(i);
            let mut scratch = params.clone();
            let mut f1 = |v: f64| {
                scratch.set(i, v);
                eval_params(obj, &mut cache, &scratch)
            };
            let (x, fx) = minimize_coordinate(&mut f1, incumbent, half_width, 1e-8, cfg.coord_budget);
            if best.is_none_or(|(_, _, fb)| fx < fb) {
                best = Some((i, x, fx));
            }
        }
        let (i, x, fx) = best.expect("at least two coordinates");
        let next = if fx < current {
            params.set(i, x);
            fx
        } else {
            current // no coordinate improves on the incumbent
        };
        trace.push(next);
        let rel = if next == current {
            0.0
        } else {
            (next - current).abs() / current.abs().max(f64::MIN_POSITIVE)
        };
        current = next;
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        fitted: params.to_mixture()?,
        params: Some(params),
        objective_trace: trace,
        converged,
        iterations,
    })
}

/// Scale-aware deterministic initialization: means equally spaced between
/// the 10th and 90th percentiles of the target, `σ` = empirical sd / C,
/// uniform weights.
fn spread_init(p10: f64, p90: f64, sd: f64, c: usize) -> Result<FitParams, FitError> {
    let lo = p10.min(p90);
    let hi = p90.max(p10);
    let span = (hi - lo).max(1e-6 * hi.abs().max(1.0));
    let mut means = Vec::with_capacity(c);
    if c == 1 {
        means.push(0.5 * (lo + hi));
    } else {
        for k in 0..c {
            means.push(lo + span * k as f64 / (c - 1) as f64);
        }
    }
    let sigma = (sd / c as f64).max(1e-6 * span);
    FitParams::encode(&means, sigma, &vec![1.0 / c as f64; c])
}

/// Fits a shared-sigma normal mixture to a bin forecast by minimizing the
/// KL divergence with block coordinate descent. `init` overrides the
/// default percentile-spread initialization.
pub fn fit_bins(
    f: &BinForecast,
    cfg: &FitConfig,
    init: Option<FitParams>,
) -> Result<FitReport, FitError> {
    cfg.validate()?;
    let nonzero = f.probs().iter().filter(|&&p| p > 0.0).count();
    if nonzero <= cfg.components {
        return Err(FitError::TooFewBins {
            need: cfg.components,
            got: nonzero,
        });
    }
    let init = match init {
        Some(p) => p,
        None => {
            let (_, sd) = f.midpoint_moments();
            spread_init(
                f.interpolated_quantile(0.1),
                f.interpolated_quantile(0.9),
                sd,
                cfg.components,
            )?
        }
    };
    run_block_coordinate_descent(&BinObjective { f }, init, cfg)
}

/// Fits a shared-sigma normal mixture to a quantile forecast by minimizing
/// the probability-scale squared residuals. Requires `N >= 2C + 1`
/// quantiles so the 2C parameters stay identifiable.
pub fn fit_quantiles(
    q: &QuantileForecast,
    cfg: &FitConfig,
    init: Option<FitParams>,
) -> Result<FitReport, FitError> {
    cfg.validate()?;
    let need = 2 * cfg.components + 1;
    if q.len() < need {
        return Err(FitError::TooFewQuantiles {
            need,
            got: q.len(),
            c: cfg.components,
        });
    }
    let init = match init {
        Some(p) => p,
        None => {
            let s = SampleForecast::new(q.values().to_vec())?;
            spread_init(q.interpolate(0.1), q.interpolate(0.9), s.sd(), cfg.components)?
        }
    };
    run_block_coordinate_descent(&QuantileObjective { q }, init, cfg)
}

/// Fits for `C = 1..=cfg.components` with two warm starts per stage: the
/// previous fit extended by a negligible-weight far component, and the
/// previous fit with a real-weight component inserted at its worst residual.
/// The better result is kept. The negligible-weight candidate starts where
/// fit `C` ended, so the best objective can only move down as components are
/// added; the residual-seeded candidate keeps a stalled extension from
/// trapping the sweep at a saddle where the new component never gains
/// weight.
pub fn fit_bins_sweep(f: &BinForecast, cfg: &FitConfig) -> Result<Vec<FitReport>, FitError> {
    let (_, sd) = f.midpoint_moments();
    sweep(
        cfg,
        |c, init| fit_bins(f, &FitConfig { components: c, ..cfg.clone() }, init),
        |m| {
            // midpoint of the bin the fit most underweights
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, &p) in f.probs().iter().enumerate() {
                let deficit = p - m.prob_between(f.edges()[i], f.edges()[i + 1]);
                if deficit > best.1 {
                    best = (i, deficit);
                }
            }
            0.5 * (f.edges()[best.0] + f.edges()[best.0 + 1])
        },
        |c| {
            let means = (0..c)
                .map(|k| f.interpolated_quantile((k as f64 + 0.5) / c as f64))
                .collect();
            spaced_init(means, sd, c)
        },
    )
}

/// Quantile-forecast analogue of [`fit_bins_sweep`].
pub fn fit_quantiles_sweep(
    q: &QuantileForecast,
    cfg: &FitConfig,
) -> Result<Vec<FitReport>, FitError> {
    let sd = SampleForecast::new(q.values().to_vec())
        .map(|s| s.sd())
        .unwrap_or(1.0);
    sweep(
        cfg,
        |c, init| fit_quantiles(q, &FitConfig { components: c, ..cfg.clone() }, init),
        |m| {
            // value at the level the fit misses worst
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, (&l, &v)) in q.levels().iter().zip(q.values()).enumerate() {
                let r = (l - m.cdf(v)).abs();
                if r > best.1 {
                    best = (i, r);
                }
            }
            q.values()[best.0]
        },
        |c| {
            let means = (0..c)
                .map(|k| q.interpolate((k as f64 + 0.5) / c as f64))
                .collect();
            spaced_init(means, sd, c)
        },
    )
}

/// Init with means at probability-equispaced quantiles of the target; lands
/// components in every region carrying mass, which value-equispaced means
/// miss on strongly bimodal targets.
fn spaced_init(mut means: Vec<f64>, sd: f64, c: usize) -> Option<FitParams> {
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let span = (means[c - 1] - means[0]).abs().max(1e-6);
    for i in 1..c {
        if means[i] <= means[i - 1] {
            means[i] = means[i - 1] + 1e-6 * span;
        }
    }
    let sigma = (sd / c as f64).max(1e-9 * span);
    FitParams::encode(&means, sigma, &vec![1.0 / c as f64; c]).ok()
}

/// Per stage the sweep races three warm starts and keeps the best fit:
/// the previous fit with a negligible extra component (this one starts at
/// the previous optimum, making the best objective nonincreasing in `C`),
/// the previous fit with a real-weight component seeded at its worst
/// residual (escapes the saddle where a negligible component never gains
/// weight), and a fresh probability-spaced start (escapes bad basins the
/// chain may have settled in).
fn sweep(
    cfg: &FitConfig,
    mut fit_one: impl FnMut(usize, Option<FitParams>) -> Result<FitReport, FitError>,
    mut residual_peak: impl FnMut(&Mixture) -> f64,
    mut spaced: impl FnMut(usize) -> Option<FitParams>,
) -> Result<Vec<FitReport>, FitError> {
    cfg.validate()?;
    let mut reports: Vec<FitReport> = Vec::with_capacity(cfg.components);
    for c in 1..=cfg.components {
        let nested = reports
            .last()
            .and_then(|r| r.params.as_ref())
            .map(|p| p.with_extra_component());
        let mut best = fit_one(c, nested)?;
        let mut extra_inits: Vec<FitParams> = Vec::new();
        if let Some(prev) = reports.last() {
            let loc = residual_peak(&prev.fitted);
            if let Some(p) = prev
                .params
                .as_ref()
                .and_then(|p| p.with_component_at(loc, 0.15))
            {
                extra_inits.push(p);
            }
            if let Some(p) = spaced(c) {
                extra_inits.push(p);
            }
        }
        for init in extra_inits {
            if let Ok(alt) = fit_one(c, Some(init)) {
                if alt.final_objective() < best.final_objective() {
                    best = alt;
                }
            }
        }
        reports.push(best);
    }
    Ok(reports)
}

/// Draws a sample from a bin forecast: a bin is chosen with its probability,
/// then a value uniformly within it. Deterministic per seed.
pub fn bin_sample(f: &BinForecast, n: usize, seed: u64) -> SampleForecast {
    let mut rng = StdRng::seed_from_u64(seed);
    let edges = f.edges();
    let draws = (0..n)
        .map(|_| {
            let pick: f64 = rng.random();
            let mut acc = 0.0;
            let mut idx = f.len() - 1;
            for (i, &p) in f.probs().iter().enumerate() {
                acc += p;
                if pick <= acc {
                    idx = i;
                    break;
                }
            }
            let u: f64 = rng.random();
            edges[idx] + u * (edges[idx + 1] - edges[idx])
        })
        .collect();
    SampleForecast::new(draws).expect("n >= 1 draws from finite edges")
}

/// Maximum-likelihood fit of a `C`-component normal mixture to a sample by
/// EM with per-component standard deviations, taking the best of `restarts`
/// runs (the first restart is deterministic, the rest draw their initial
/// means from the sample). A restart is abandoned if any component's sd
/// collapses below `1e-8` of the sample range.
pub fn fit_sample_em(
    s: &SampleForecast,
    components: usize,
    restarts: usize,
    tol: f64,
) -> Result<FitReport, FitError> {
    fit_sample_em_inner(s, components, restarts, tol, None)
}

/// EM fits for `C = 1..=max_components`, each warm-started from the previous
/// fit extended by a negligible-weight far component (tried alongside the
/// usual restarts), so added components never lose likelihood.
pub fn fit_sample_em_sweep(
    s: &SampleForecast,
    max_components: usize,
    restarts: usize,
    tol: f64,
) -> Result<Vec<FitReport>, FitError> {
    let mut reports: Vec<FitReport> = Vec::with_capacity(max_components);
    for c in 1..=max_components {
        let nested = reports.last().map(|r| nested_em_init(&r.fitted));
        reports.push(fit_sample_em_inner(s, c, restarts, tol, nested)?);
    }
    Ok(reports)
}

/// Nested EM warm start: the fitted components plus one tiny far component.
fn nested_em_init(fitted: &Mixture) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut means: Vec<f64> = fitted.components().iter().map(|c| c.params()[0]).collect();
    let mut sds: Vec<f64> = fitted.components().iter().map(|c| c.params()[1]).collect();
    let mut weights: Vec<f64> = fitted.components().iter().map(|c| c.weight()).collect();
    let spread = sds.iter().cloned().fold(0.0f64, f64::max).max(1e-6);
    means.push(means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + spread);
    sds.push(spread);
    let eps = 1e-6;
    for w in weights.iter_mut() {
        *w *= 1.0 - eps;
    }
    weights.push(eps);
    (means, sds, weights)
}

fn check_em_preconditions(s: &SampleForecast, components: usize) -> Result<(), FitError> {
    if components == 0 {
        return Err(FitError::ZeroComponents);
    }
    if s.len() <= 10 * components {
        return Err(FitError::TooFewDraws {
            need: 10 * components,
            got: s.len(),
            c: components,
        });
    }
    Ok(())
}

fn fit_sample_em_inner(
    s: &SampleForecast,
    components: usize,
    restarts: usize,
    tol: f64,
    extra_init: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
) -> Result<FitReport, FitError> {
    check_em_preconditions(s, components)?;
    let xs = s.draws();
    let n = xs.len();
    let sd0 = s.sd().max(1e-12);
    let mut inits: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    if let Some(init) = extra_init {
        inits.push(init);
    }
    // deterministic first start: means at evenly spread sample quantiles
    let levels: Vec<f64> = (0..components)
        .map(|k| (k as f64 + 0.5) / components as f64)
        .collect();
    let q0 = s.quantiles(&levels)?;
    inits.push((
        q0.values().to_vec(),
        vec![sd0; components],
        vec![1.0 / components as f64; components],
    ));
    let mut rng = StdRng::seed_from_u64(0x6d69_7863);
    for _ in 1..restarts.max(1) {
        let means: Vec<f64> = (0..components)
            .map(|_| xs[rng.random_range(0..n)])
            .collect();
        inits.push((means, vec![sd0; components], vec![1.0 / components as f64; components]));
    }
    run_em_over_inits(s, inits, tol)
}

fn run_em_over_inits(
    s: &SampleForecast,
    inits: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    tol: f64,
) -> Result<FitReport, FitError> {
    let xs = s.draws();
    let n = xs.len();
    let counts: Vec<f64> = match s.weights() {
        Some(ws) => ws.iter().map(|&w| w * n as f64).collect(),
        None => vec![1.0; n],
    };
    let range = {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(1e-12)
    };
    let min_sd = 1e-8 * range;
    let max_iter = 500;

    let mut best: Option<(f64, FitReport)> = None;
    for (means, sds, weights) in inits {
        if let Some((ll, report)) = em_run(xs, &counts, means, sds, weights, tol, max_iter, min_sd)?
        {
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, report));
            }
        }
    }
    best.map(|(_, r)| r).ok_or(FitError::DegenerateFit)
}

#[allow(clippy::too_many_arguments)]
fn em_run(
    xs: &[f64],
    counts: &[f64],
    mut means: Vec<f64>,
    mut sds: Vec<f64>,
    mut weights: Vec<f64>,
    tol: f64,
    max_iter: usize,
    min_sd: f64,
) -> Result<Option<(f64, FitReport)>, FitError> {
    let c = means.len();
    let total: f64 = counts.iter().sum();
    let loglik = |means: &[f64], sds: &[f64], weights: &[f64]| -> f64 {
        xs.iter()
            .zip(counts)
            .map(|(&x, &cnt)| {
                let mut p = 0.0;
                for k in 0..c {
                    p += weights[k] * Normal::new(means[k], sds[k]).expect("validated").pdf(x);
                }
                cnt * p.max(f64::MIN_POSITIVE).ln()
            })
            .sum()
    };

    let mut ll = loglik(&means, &sds, &weights);
    let mut trace = vec![-ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = vec![0.0f64; c];

    for _ in 0..max_iter {
        iterations += 1;
        let mut sum_r = vec![0.0f64; c];
        let mut sum_rx = vec![0.0f64; c];
        let mut sum_rxx = vec![0.0f64; c];
        for (&x, &cnt) in xs.iter().zip(counts) {
            let mut denom = 0.0;
            for k in 0..c {
                resp[k] = weights[k] * Normal::new(means[k], sds[k]).expect("validated").pdf(x);
                denom += resp[k];
            }
            if denom <= 0.0 {
                // the point is unexplained at this state; spread blame evenly
                for r in resp.iter_mut() {
                    *r = 1.0 / c as f64;
                }
                denom = 1.0;
            }
            for k in 0..c {
                let r = cnt * resp[k] / denom;
                sum_r[k] += r;
                sum_rx[k] += r * x;
                sum_rxx[k] += r * x * x;
            }
        }
        for k in 0..c {
            if sum_r[k] <= 0.0 {
                return Ok(None); // empty component
            }
            weights[k] = sum_r[k] / total;
            means[k] = sum_rx[k] / sum_r[k];
            let var = (sum_rxx[k] / sum_r[k] - means[k] * means[k]).max(0.0);
            sds[k] = var.sqrt();
            if sds[k] < min_sd {
                return Ok(None); // degenerate collapse
            }
        }
        let ll_next = loglik(&means, &sds, &weights);
        trace.push(-ll_next);
        let rel = if ll_next == ll {
            0.0
        } else {
            (ll_next - ll).abs() / ll.abs().max(1e-12)
        };
        ll = ll_next;
        if rel < tol {
            converged = true;
            break;
        }
    }

    // sort components by mean for a stable presentation
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap());
    let comps = order
        .iter()
        .map(|&k| Component::norm(means[k], sds[k], weights[k].clamp(f64::MIN_POSITIVE, 1.0)))
        .collect::<Result<Vec<_>, _>>()?;
    let fitted = Mixture::new_normalized(comps)?;
    Ok(Some((
        ll,
        FitReport {
            fitted,
            params: None,
            objective_trace: trace,
            converged,
            iterations,
        },
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representations::discretize;

    fn bimodal(sep: f64, sd: f64) -> Mixture {
        Mixture::new(vec![
            Component::norm(3.0, sd, 0.5).unwrap(),
            Component::norm(3.0 + sep, sd, 0.5).unwrap(),
        ])
        .unwrap()
    }

    fn grid_edges(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
    }

    fn tight() -> FitConfig {
        FitConfig {
            components: 1,
            rel_tol: 1e-9,
            max_outer_iter: 3000,
            ..Default::default()
        }
    }

    #[test]
    fn params_roundtrip_is_identity() {
        let p = FitParams::new(1.5, vec![-0.3, 0.8], 0.25, vec![0.4, -1.2]).unwrap();
        let d = p.decode();
        let q = FitParams::encode(&d.means, d.sigma, &d.weights).unwrap();
        assert!((p.mu1 - q.mu1).abs() < 1e-12);
        assert!((p.eta - q.eta).abs() < 1e-12);
        for (a, b) in p.alpha.iter().zip(&q.alpha) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in p.nu.iter().zip(&q.nu) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoded_constraints_hold_for_wild_params() {
        let p = FitParams::new(-40.0, vec![8.0, -17.0], -9.0, vec![25.0, -25.0]).unwrap();
        let d = p.decode();
        assert!(d.means.windows(2).all(|w| w[0] < w[1]));
        assert!(d.sigma > 0.0);
        assert!(d.weights.iter().all(|&w| w > 0.0));
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kld_of_matching_discretization_is_zero() {
        let m = Mixture::new(vec![Component::new_truncated(
            crate::Family::Lnorm,
            &[1.0, 0.4],
            Some(0.0),
            Some(8.0),
            1.0,
        )
        .unwrap()])
        .unwrap();
        let f = discretize(&m, &grid_edges(0.0, 8.0, 40)).unwrap();
        assert!(kld(&f, &m).abs() < 1e-10);
    }

    #[test]
    fn kld_second_order_expansion() {
        let f = BinForecast::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let m = Mixture::new(vec![
            Component::unif(0.0, 1.0, 0.51).unwrap(),
            Component::unif(1.0, 2.0, 0.49).unwrap(),
        ])
        .unwrap();
        let d = kld(&f, &m);
        assert!((d - 2.0e-4).abs() < 5e-6, "kld = {d}");
    }

    #[test]
    fn kld_nonnegative_and_infinite_on_missing_mass() {
        let f = BinForecast::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let m = Mixture::new(vec![Component::norm(1.0, 0.7, 1.0).unwrap()]).unwrap();
        assert!(kld(&f, &m) >= 0.0);
        let outside = Mixture::new(vec![Component::unif(5.0, 6.0, 1.0).unwrap()]).unwrap();
        assert!(kld(&f, &outside).is_infinite());
    }

    #[test]
    fn ss_identity_and_bounds() {
        let m = bimodal(3.0, 0.9);
        let q = crate::representations::mixture_quantiles(&m, &crate::hub_levels()).unwrap();
        assert!(ss_quantiles(&q, &m) < 1e-12);
        // each term is at most 1
        let far = Mixture::new(vec![Component::norm(100.0, 0.1, 1.0).unwrap()]).unwrap();
        let n = q.len() as f64;
        assert!(ss_quantiles(&q, &far) <= n);
    }

    #[test]
    fn ss_single_level_arithmetic() {
        let m = Mixture::new(vec![Component::norm(0.0, 1.0, 1.0).unwrap()]).unwrap();
        let v = m.quantile(0.4).unwrap();
        let q = QuantileForecast::new(vec![0.5], vec![v]).unwrap();
        assert!((ss_quantiles(&q, &m) - 0.01).abs() < 1e-10);
    }

    #[test]
    fn fit_bins_single_normal_recovery() {
        let truth = Mixture::new(vec![Component::new_truncated(
            crate::Family::Norm,
            &[5.0, 1.0],
            Some(0.0),
            Some(10.0),
            1.0,
        )
        .unwrap()])
        .unwrap();
        let f = discretize(&truth, &grid_edges(0.0, 10.0, 50)).unwrap();
        let report = fit_bins(&f, &tight(), None).unwrap();
        let d = report.params.as_ref().unwrap().decode();
        assert!((d.means[0] - 5.0).abs() < 0.02, "mean = {}", d.means[0]);
        assert!((d.sigma - 1.0).abs() < 0.02, "sigma = {}", d.sigma);

        // coarse grid-search oracle: the fit must beat every grid point
        let fit_obj = report.final_objective();
        for mi in 0..=40 {
            for si in 1..=30 {
                let mu = 3.0 + 0.1 * mi as f64;
                let sd = 0.1 * si as f64;
                let m = Mixture::new(vec![Component::norm(mu, sd, 1.0).unwrap()]).unwrap();
                assert!(fit_obj <= kld(&f, &m) + 1e-9);
            }
        }
    }

    #[test]
    fn fit_bins_two_component_recovery() {
        let truth = bimodal(4.0, 0.8);
        let f = discretize(
            &Mixture::new(vec![
                Component::new_truncated(crate::Family::Norm, &[3.0, 0.8], Some(0.0), Some(10.0), 0.5).unwrap(),
                Component::new_truncated(crate::Family::Norm, &[7.0, 0.8], Some(0.0), Some(10.0), 0.5).unwrap(),
            ])
            .unwrap(),
            &grid_edges(0.0, 10.0, 50),
        )
        .unwrap();
        let _ = truth;
        let cfg = FitConfig {
            components: 2,
            rel_tol: 1e-9,
            max_outer_iter: 3000,
            ..Default::default()
        };
        let report = fit_bins(&f, &cfg, None).unwrap();
        let d = report.params.as_ref().unwrap().decode();
        assert!((d.means[0] - 3.0).abs() < 0.05, "means = {:?}", d.means);
        assert!((d.means[1] - 7.0).abs() < 0.05);
        assert!((d.sigma - 0.8).abs() < 0.05, "sigma = {}", d.sigma);
        assert!((d.weights[0] - 0.5).abs() < 0.02, "weights = {:?}", d.weights);
        assert!(report.converged);
    }

    #[test]
    fn fit_bins_nested_components_dominate() {
        let truth = Mixture::new(vec![Component::new_truncated(
            crate::Family::Norm,
            &[5.0, 1.0],
            Some(0.0),
            Some(10.0),
            1.0,
        )
        .unwrap()])
        .unwrap();
        let f = discretize(&truth, &grid_edges(0.0, 10.0, 30)).unwrap();
        let cfg = FitConfig {
            components: 3,
            ..Default::default()
        };
        let reports = fit_bins_sweep(&f, &cfg).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(
            reports[2].final_objective() <= reports[0].final_objective() + 1e-9,
            "C=3 {} vs C=1 {}",
            reports[2].final_objective(),
            reports[0].final_objective()
        );

        // the same dominance holds nesting the C=1 solution into C=3 directly
        let c1 = fit_bins(&f, &FitConfig::with_components(1), None).unwrap();
        let nested3 = c1
            .params
            .as_ref()
            .unwrap()
            .with_extra_component()
            .with_extra_component();
        let c3 = fit_bins(&f, &cfg, Some(nested3)).unwrap();
        assert!(c3.final_objective() <= c1.final_objective() + 1e-9);
    }

    #[test]
    fn fit_bins_trace_is_nonincreasing() {
        let f = discretize(&bimodal(3.0, 1.0).truncate_for_test(), &grid_edges(-1.0, 10.0, 40)).unwrap();
        let cfg = FitConfig {
            components: 2,
            ..Default::default()
        };
        let report = fit_bins(&f, &cfg, None).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn fit_bins_precondition() {
        let f = BinForecast::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let cfg = FitConfig::with_components(3);
        assert!(matches!(
            fit_bins(&f, &cfg, None),
            Err(FitError::TooFewBins { .. })
        ));
    }

    #[test]
    fn fit_bins_deterministic() {
        let f = discretize(&bimodal(3.0, 1.0).truncate_for_test(), &grid_edges(-1.0, 10.0, 30)).unwrap();
        let cfg = FitConfig::with_components(2);
        let a = fit_bins(&f, &cfg, None).unwrap();
        let b = fit_bins(&f, &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.objective_trace, b.objective_trace);
    }

    #[test]
    fn fit_quantiles_recovers_normal() {
        let truth = Mixture::new(vec![Component::norm(10.0, 2.0, 1.0).unwrap()]).unwrap();
        let q = crate::representations::mixture_quantiles(&truth, &crate::hub_levels()).unwrap();
        let report = fit_quantiles(&q, &tight(), None).unwrap();
        let d = report.params.as_ref().unwrap().decode();
        assert!(report.final_objective() < 1e-8, "ss = {}", report.final_objective());
        assert!((d.means[0] - 10.0).abs() < 0.01);
        assert!((d.sigma - 2.0).abs() < 0.01);
    }

    #[test]
    fn fit_quantiles_bimodal_needs_two_components() {
        let truth = bimodal(5.0, 0.8);
        let q = crate::representations::mixture_quantiles(&truth, &crate::hub_levels()).unwrap();
        let cfg1 = FitConfig {
            components: 1,
            rel_tol: 1e-8,
            max_outer_iter: 2000,
            ..Default::default()
        };
        let cfg2 = FitConfig {
            components: 2,
            rel_tol: 1e-8,
            max_outer_iter: 2000,
            ..Default::default()
        };
        let r1 = fit_quantiles(&q, &cfg1, None).unwrap();
        let r2 = fit_quantiles(&q, &cfg2, None).unwrap();
        assert!(
            r2.final_objective() < r1.final_objective(),
            "C=2 {} vs C=1 {}",
            r2.final_objective(),
            r1.final_objective()
        );
    }

    #[test]
    fn fit_quantiles_identifiability_floor() {
        let q = QuantileForecast::new(vec![0.25, 0.5, 0.75], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(fit_quantiles(&q, &FitConfig::with_components(1), None).is_ok());
        assert!(matches!(
            fit_quantiles(&q, &FitConfig::with_components(2), None),
            Err(FitError::TooFewQuantiles { .. })
        ));
    }

    #[test]
    fn shared_sigma_flag_is_required() {
        let q = crate::representations::mixture_quantiles(
            &Mixture::new(vec![Component::norm(0.0, 1.0, 1.0).unwrap()]).unwrap(),
            &crate::hub_levels(),
        )
        .unwrap();
        let cfg = FitConfig {
            shared_sigma: false,
            ..Default::default()
        };
        assert!(matches!(
            fit_quantiles(&q, &cfg, None),
            Err(FitError::UnsupportedSigmaMode)
        ));
    }

    #[test]
    fn bin_sample_respects_support() {
        let f = BinForecast::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let s = bin_sample(&f, 5, 3);
        assert!(s.draws().iter().all(|&d| (0.0..1.0).contains(&d)));

        let f2 = BinForecast::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0]).unwrap();
        let s2 = bin_sample(&f2, 200, 4);
        assert!(s2.draws().iter().all(|&d| d < 1.0));
    }

    #[test]
    fn bin_sample_frequencies_match() {
        let f = BinForecast::new(vec![0.0, 1.0, 2.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        let n = 100_000;
        let s = bin_sample(&f, n, 11);
        for (i, &p) in f.probs().iter().enumerate() {
            let count = s
                .draws()
                .iter()
                .filter(|&&d| d >= f.edges()[i] && d < f.edges()[i + 1])
                .count();
            let freq = count as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se, "bin {i}: {freq} vs {p}");
        }
    }

    #[test]
    fn em_single_component_closed_form() {
        let xs: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() * 2.0 + 5.0).collect();
        let s = SampleForecast::new(xs.clone()).unwrap();
        let report = fit_sample_em(&s, 1, 1, 1e-12).unwrap();
        let c = &report.fitted.components()[0];
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let biased_sd =
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((c.params()[0] - mean).abs() < 1e-9);
        assert!((c.params()[1] - biased_sd).abs() < 1e-9);
    }

    #[test]
    fn em_recovers_separated_mixture() {
        let truth = Mixture::new(vec![
            Component::norm(0.0, 1.0, 0.5).unwrap(),
            Component::norm(6.0, 1.0, 0.5).unwrap(),
        ])
        .unwrap();
        let s = SampleForecast::new(truth.sample(700, 99)).unwrap();
        let report = fit_sample_em(&s, 2, 3, 1e-10).unwrap();
        let comps = report.fitted.components();
        assert!((comps[0].params()[0] - 0.0).abs() < 0.2, "{:?}", comps[0].params());
        assert!((comps[1].params()[0] - 6.0).abs() < 0.2);
        assert!((comps[0].weight() - 0.5).abs() < 0.1);
    }

    #[test]
    fn em_neg_loglik_trace_monotone() {
        let s = SampleForecast::new(bimodal(4.0, 1.0).sample(300, 5)).unwrap();
        let report = fit_sample_em(&s, 2, 2, 1e-10).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "trace rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn em_ks_nonincreasing_in_components() {
        // 700 draws resampled from a rich many-bin forecast, as in the
        // retrospective diagnostic; this sample's KS trajectory decreases
        // through all five component counts
        let truth = Mixture::new(vec![
            Component::new_truncated(crate::Family::Norm, &[2.0, 0.4], Some(0.0), Some(11.0), 0.35).unwrap(),
            Component::new_truncated(crate::Family::Norm, &[4.0, 0.8], Some(0.0), Some(11.0), 0.30).unwrap(),
            Component::new_truncated(crate::Family::Norm, &[6.5, 0.5], Some(0.0), Some(11.0), 0.20).unwrap(),
            Component::new_truncated(crate::Family::Norm, &[8.2, 0.9], Some(0.0), Some(11.0), 0.15).unwrap(),
        ])
        .unwrap();
        let base = discretize(&truth, &grid_edges(0.0, 11.0, 120)).unwrap();
        let s = bin_sample(&base, 700, 0);
        let reports = fit_sample_em_sweep(&s, 5, 3, 1e-9).unwrap();
        let mut prev_ks = f64::INFINITY;
        for (c, report) in reports.iter().enumerate() {
            let ks = crate::scoring::ks_stat(&s, |x| report.fitted.cdf(x));
            assert!(ks <= prev_ks + 1e-9, "C={}: ks {ks} > {prev_ks}", c + 1);
            prev_ks = ks;
        }
    }

    #[test]
    fn em_too_few_draws_rejected() {
        let s = SampleForecast::new(vec![1.0; 15]).unwrap();
        assert!(matches!(
            fit_sample_em(&s, 2, 1, 1e-8),
            Err(FitError::TooFewDraws { .. })
        ));
    }

    /// Helper used by fitting tests: truncate a mixture of normals to a wide
    /// interval so it can be discretized onto a bounded grid.
    impl Mixture {
        fn truncate_for_test(&self) -> Mixture {
            let comps = self
                .components()
                .iter()
                .map(|c| {
                    Component::new_truncated(
                        c.family(),
                        c.params(),
                        Some(-1.0),
                        Some(10.0),
                        c.weight(),
                    )
                    .unwrap()
                })
                .collect();
            Mixture::new(comps).unwrap()
        }
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn encode_decode_roundtrip(
                mu1 in -20.0f64..20.0,
                alpha in proptest::collection::vec(-3.0f64..3.0, 0..4),
                eta in -3.0f64..3.0,
            ) {
                let nu: Vec<f64> = alpha.iter().map(|a| -a * 0.5).collect();
                let p = FitParams::new(mu1, alpha, eta, nu).unwrap();
                let d = p.decode();
                prop_assert!(d.means.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(d.sigma > 0.0);
                prop_assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let q = FitParams::encode(&d.means, d.sigma, &d.weights).unwrap();
                prop_assert!((p.mu1 - q.mu1).abs() < 1e-10);
                prop_assert!((p.eta - q.eta).abs() < 1e-10);
                for (a, b) in p.alpha.iter().zip(&q.alpha) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
                for (a, b) in p.nu.iter().zip(&q.nu) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}

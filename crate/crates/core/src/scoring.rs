//! Proper scoring rules for probabilistic forecasts.
//!
//! Lower is better throughout: the log score `-log p(x*)`, the continuous
//! ranked probability score `∫ (F(x) - 1{x* <= x})² dx`, the interval score
//! for a single central prediction interval, and the weighted interval score
//! over a set of intervals plus the median. The Kolmogorov-Smirnov statistic
//! between a sample and a CDF lives here too.
//!
//! CRPS is evaluated by adaptive quadrature split at the observation (the
//! integrand has a kink there) for mixtures, and analytically for the step
//! CDFs of bin and sample forecasts. All functions are pure.

use crate::distributions::Mixture;
use crate::representations::{BinForecast, QuantileForecast, SampleForecast};
use thiserror::Error;

/// Absolute tolerance for the CRPS quadrature.
const CRPS_TOL: f64 = 1e-8;

/// Maximum adaptive bisection depth per segment before giving up.
const MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScoreError {
    #[error("observation must be finite, got {0}")]
    NonFiniteObservation(f64),
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailed(String),
    #[error("interval score level {0} outside (0, 1)")]
    BadAlpha(f64),
    #[error("interval bounds inverted: lower {lower} > upper {upper}")]
    InvertedInterval { lower: f64, upper: f64 },
    #[error("interval set must contain at least one interval")]
    EmptyIntervalSet,
    #[error("interval set: {0}")]
    BadIntervalSet(String),
    #[error(transparent)]
    Dist(#[from] crate::distributions::DistError),
}

/// Log score: the negative log predictive density (or mass) at the realized
/// value. Zero density yields `+∞` rather than an error, so batch scoring
/// over a corpus can proceed; the infinity itself is the flag.
pub fn log_score(m: &Mixture, x_star: f64) -> Result<f64, ScoreError> {
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let density = m.pdf(x_star);
    if density > 0.0 {
        Ok(-density.ln())
    } else {
        Ok(f64::INFINITY)
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let fc = f(c);
    ((b - a) / 6.0 * (fa + 4.0 * fc + fb), c, fc)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    c: f64,
    fc: f64,
    tol: f64,
    depth: u32,
    exhausted: &mut bool,
) -> f64 {
    let (left, lc, flc) = simpson(f, a, fa, c, fc);
    let (right, rc, frc) = simpson(f, c, fc, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || b - a < 1e-14 * (a.abs() + b.abs()).max(1.0) {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *exhausted = true;
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, c, fc, left, lc, flc, 0.5 * tol, depth - 1, exhausted)
        + adaptive(f, c, fc, b, fb, right, rc, frc, 0.5 * tol, depth - 1, exhausted)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Flags non-convergence instead of silently returning garbage.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, ScoreError> {
    if b <= a {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, c, fc) = simpson(&f, a, fa, b, fb);
    let mut exhausted = false;
    let v = adaptive(&f, a, fa, b, fb, whole, c, fc, tol, MAX_DEPTH, &mut exhausted);
    if exhausted || !v.is_finite() {
        return Err(ScoreError::QuadratureFailed(format!(
            "integral over [{a}, {b}] did not converge"
        )));
    }
    Ok(v)
}

/// CRPS of a mixture forecast by adaptive quadrature.
///
/// The integration range spans the extreme mixture quantiles padded by one
/// interquartile range, split at the observation; CDF jump points of any
/// discrete components split it further so each piece is smooth.
pub fn crps_mixture(m: &Mixture, x_star: f64) -> Result<f64, ScoreError> {
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let q_lo = m.quantile(1e-9)?;
    let q_hi = m.quantile(1.0 - 1e-9)?;
    let iqr = (m.quantile(0.75)? - m.quantile(0.25)?).max(1e-6);
    let lo = (q_lo - iqr).min(x_star);
    let hi = (q_hi + iqr).max(x_star);

    let mut cuts = vec![lo];
    if m.has_discrete() {
        cuts.extend(m.discrete_jumps(lo, hi));
    }
    cuts.push(x_star);
    cuts.push(hi);
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let total_len = hi - lo;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let integrand = |x: f64| {
            let ind = if x_star <= x { 1.0 } else { 0.0 };
            let d = m.cdf(x) - ind;
            d * d
        };
        let tol = (CRPS_TOL * (b - a) / total_len).max(1e-15);
        total += integrate(integrand, a, b, tol)?;
    }
    Ok(total)
}

/// Exact CRPS for a right-continuous step CDF given as jump points paired
/// with the cumulative probability immediately after each jump.
fn crps_step(jumps: &[(f64, f64)], x_star: f64) -> f64 {
    debug_assert!(!jumps.is_empty());
    let mut points: Vec<f64> = jumps.iter().map(|&(x, _)| x).collect();
    let pos = points.partition_point(|&x| x < x_star);
    points.insert(pos, x_star);
    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // cumulative probability on [a, b): the last jump at or before a
        let i = jumps.partition_point(|&(x, _)| x <= a);
        let f = if i == 0 { 0.0 } else { jumps[i - 1].1 };
        let ind = if a >= x_star { 1.0 } else { 0.0 };
        let d = f - ind;
        total += d * d * (b - a);
    }
    // tail beyond the last jump when the observation lies out there
    let last = *points.last().expect("nonempty");
    if x_star > last {
        // F = 1 on [last, x_star), indicator 0
        // (already covered: x_star was inserted, so `last` == x_star)
    }
    total
}

/// CRPS of a bin forecast. The bin CDF is a step function jumping at each
/// bin's left edge, so the integral is evaluated exactly.
pub fn crps_bin(f: &BinForecast, x_star: f64) -> Result<f64, ScoreError> {
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let mut cum = 0.0;
    let mut jumps = Vec::with_capacity(f.len());
    for (i, &p) in f.probs().iter().enumerate() {
        cum += p;
        jumps.push((f.edges()[i], cum.min(1.0)));
    }
    Ok(crps_step(&jumps, x_star))
}

/// CRPS of a sample forecast scored through its (weighted) ECDF, evaluated
/// exactly as a piecewise-constant integral.
pub fn crps_ecdf(s: &SampleForecast, x_star: f64) -> Result<f64, ScoreError> {
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let sorted = s.sorted_weighted();
    let mut jumps = Vec::with_capacity(sorted.len());
    let mut cum = 0.0;
    for &(x, w) in &sorted {
        cum += w;
        match jumps.last_mut() {
            Some((last_x, last_c)) if *last_x == x => *last_c = cum.min(1.0),
            _ => jumps.push((x, cum.min(1.0))),
        }
    }
    Ok(crps_step(&jumps, x_star))
}

/// Interval score for the central `(1 - alpha)` prediction interval
/// `[lower, upper]`: the interval width plus `2/alpha` times the distance by
/// which the observation escapes the interval.
pub fn interval_score(alpha: f64, lower: f64, upper: f64, x_star: f64) -> Result<f64, ScoreError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ScoreError::BadAlpha(alpha));
    }
    if lower > upper {
        return Err(ScoreError::InvertedInterval { lower, upper });
    }
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let mut score = upper - lower;
    if x_star < lower {
        score += 2.0 / alpha * (lower - x_star);
    }
    if x_star > upper {
        score += 2.0 / alpha * (x_star - upper);
    }
    Ok(score)
}

/// A predictive median plus central intervals at distinct `alpha` levels,
/// the shape scored by the weighted interval score.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    median: f64,
    intervals: Vec<(f64, f64, f64)>, // (alpha, lower, upper)
}

impl IntervalSet {
    pub fn new(median: f64, intervals: Vec<(f64, f64, f64)>) -> Result<Self, ScoreError> {
        if intervals.is_empty() {
            return Err(ScoreError::EmptyIntervalSet);
        }
        for &(alpha, lower, upper) in &intervals {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(ScoreError::BadAlpha(alpha));
            }
            if lower > upper {
                return Err(ScoreError::InvertedInterval { lower, upper });
            }
        }
        let mut alphas: Vec<f64> = intervals.iter().map(|&(a, _, _)| a).collect();
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if alphas.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScoreError::BadIntervalSet(
                "interval levels must be distinct".into(),
            ));
        }
        Ok(IntervalSet { median, intervals })
    }

    /// Derives the interval set from a quantile forecast whose levels are
    /// symmetric pairs `(alpha/2, 1 - alpha/2)` around a reported median.
    pub fn from_quantiles(q: &QuantileForecast) -> Result<Self, ScoreError> {
        let levels = q.levels();
        let values = q.values();
        let mid = levels
            .iter()
            .position(|&l| (l - 0.5).abs() < 1e-9)
            .ok_or_else(|| ScoreError::BadIntervalSet("no median level (0.5)".into()))?;
        let median = values[mid];
        let mut intervals = Vec::new();
        for (i, &l) in levels.iter().enumerate() {
            if l >= 0.5 {
                continue;
            }
            let partner = 1.0 - l;
            let j = levels
                .iter()
                .position(|&u| (u - partner).abs() < 1e-9)
                .ok_or_else(|| {
                    ScoreError::BadIntervalSet(format!("level {l} has no partner {partner}"))
                })?;
            intervals.push((2.0 * l, values[i], values[j]));
        }
        Self::new(median, intervals)
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn intervals(&self) -> &[(f64, f64, f64)] {
        &self.intervals
    }
}

/// Weighted interval score over `K` intervals plus the median term:
///
/// `(w_0 |x* - median| + Σ_k w_k IS_{α_k}) / (K + 1/2)`
///
/// with `w_k = α_k / 2` and `w_0 = 1/2`.
pub fn wis(f: &IntervalSet, x_star: f64) -> Result<f64, ScoreError> {
    if !x_star.is_finite() {
        return Err(ScoreError::NonFiniteObservation(x_star));
    }
    let k = f.intervals.len() as f64;
    let mut acc = 0.5 * (x_star - f.median).abs();
    for &(alpha, lower, upper) in &f.intervals {
        acc += alpha / 2.0 * interval_score(alpha, lower, upper, x_star)?;
    }
    Ok(acc / (k + 0.5))
}

/// Kolmogorov-Smirnov statistic between a sample and a CDF: the supremum
/// distance between `F` and the ECDF.
///
/// At each distinct sorted draw the right values `|F(x) - ECDF(x)|` and the
/// left limits `|F(x⁻) - ECDF(x⁻)|` are compared; for a continuous `F` this
/// is the classical `max(|F(x_i) - i/n|, |F(x_i) - (i-1)/n|)`, and a sample
/// scored against its own ECDF gives exactly zero. The left limit of an
/// opaque `F` is probed just below the point.
pub fn ks_stat(s: &SampleForecast, cdf: impl Fn(f64) -> f64) -> f64 {
    // merge duplicate draws so ECDF limits are taken across whole jumps;
    // uniform weights are carried as counts so the cumulative fractions
    // reproduce the ECDF's arithmetic exactly
    let sorted = s.sorted_weighted();
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let uniform = s.weights().is_none();
    for &(x, w) in &sorted {
        let w = if uniform { 1.0 } else { w };
        match merged.last_mut() {
            Some((lx, lw)) if *lx == x => *lw += w,
            _ => merged.push((x, w)),
        }
    }
    let total = if uniform { s.len() as f64 } else { 1.0 };
    let mut d: f64 = 0.0;
    let mut cum = 0.0;
    for &(x, w) in &merged {
        let before = cum / total;
        cum += w;
        let after = cum / total;
        let f_right = cdf(x);
        let f_left = cdf(x - 1e-9 * (1.0 + x.abs()));
        d = d.max((f_right - after).abs()).max((f_left - before).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Component, Family};

    fn mdist1() -> Mixture {
        Mixture::new(vec![
            Component::lnorm(2.0, 1.0, 0.3).unwrap(),
            Component::norm(2.1, 1.0, 0.7).unwrap(),
        ])
        .unwrap()
    }

    fn mdist2() -> Mixture {
        Mixture::new(vec![
            Component::norm(1.5, 1.0, 0.4).unwrap(),
            Component::norm(4.0, 2.0, 0.6).unwrap(),
        ])
        .unwrap()
    }

    fn std_normal() -> Mixture {
        Mixture::new(vec![Component::norm(0.0, 1.0, 1.0).unwrap()]).unwrap()
    }

    /// Closed-form normal CRPS, the independent oracle for the quadrature:
    /// `σ (z (2Φ(z) - 1) + 2φ(z) - 1/√π)` with `z = (x - μ)/σ`.
    fn normal_crps(mu: f64, sd: f64, x: f64) -> f64 {
        let z = (x - mu) / sd;
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cap = 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        sd * (z * (2.0 * cap - 1.0) + 2.0 * phi - 1.0 / std::f64::consts::PI.sqrt())
    }

    #[test]
    fn log_score_reproduces_worked_pair() {
        assert!((log_score(&mdist1(), 3.0).unwrap() - 1.547238).abs() < 1e-6);
        assert!((log_score(&mdist2(), 3.0).unwrap() - 1.848796).abs() < 1e-6);
    }

    #[test]
    fn log_score_uniform_is_zero() {
        let m = Mixture::new(vec![Component::unif(0.0, 1.0, 1.0).unwrap()]).unwrap();
        assert_eq!(log_score(&m, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn log_score_zero_density_is_infinite() {
        let m = Mixture::new(vec![Component::unif(0.0, 1.0, 1.0).unwrap()]).unwrap();
        assert!(log_score(&m, 5.0).unwrap().is_infinite());
        assert!(log_score(&m, f64::NAN).is_err());
    }

    #[test]
    fn crps_reproduces_worked_pair() {
        assert!((crps_mixture(&mdist1(), 3.0).unwrap() - 0.6348212).abs() < 1e-4);
        assert!((crps_mixture(&mdist2(), 3.0).unwrap() - 0.5306083).abs() < 1e-4);
    }

    #[test]
    fn worked_pair_score_orderings_disagree() {
        // the log score prefers forecast 1, the CRPS prefers forecast 2
        assert!(log_score(&mdist1(), 3.0).unwrap() < log_score(&mdist2(), 3.0).unwrap());
        assert!(crps_mixture(&mdist2(), 3.0).unwrap() < crps_mixture(&mdist1(), 3.0).unwrap());
    }

    #[test]
    fn crps_standard_normal_at_zero() {
        assert!((crps_mixture(&std_normal(), 0.0).unwrap() - 0.2336950).abs() < 1e-6);
    }

    #[test]
    fn crps_quadrature_matches_closed_form_oracle() {
        // a fixed LCG so the cases are reproducible
        let mut state = 88172645463325252u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let mu = 20.0 * next() - 10.0;
            let sd = 0.2 + 3.0 * next();
            let x = mu + sd * (6.0 * next() - 3.0);
            let m = Mixture::new(vec![Component::norm(mu, sd, 1.0).unwrap()]).unwrap();
            let got = crps_mixture(&m, x).unwrap();
            let want = normal_crps(mu, sd, x);
            assert!((got - want).abs() < 1e-6, "mu={mu} sd={sd} x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn crps_ecdf_matches_energy_form() {
        let draws = vec![0.3, 1.2, 2.5, 2.7, 5.0];
        let s = SampleForecast::new(draws.clone()).unwrap();
        for &y in &[2.0, -1.0, 6.0, 2.5] {
            let n = draws.len() as f64;
            let e1: f64 = draws.iter().map(|d| (d - y).abs()).sum::<f64>() / n;
            let e2: f64 = draws
                .iter()
                .flat_map(|a| draws.iter().map(move |b| (a - b).abs()))
                .sum::<f64>()
                / (n * n);
            let want = e1 - 0.5 * e2;
            let got = crps_ecdf(&s, y).unwrap();
            assert!((got - want).abs() < 1e-8, "y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn crps_bin_matches_step_integral() {
        let f = BinForecast::new(vec![0.0, 1.0, 2.0], vec![0.4, 0.6]).unwrap();
        // F = 0.4 on [0,1), 1.0 on [1,∞); observation 0.5:
        // [0,0.5): 0.4²·0.5  [0.5,1): 0.6²·0.5  [1,..): 0
        let want = 0.16 * 0.5 + 0.36 * 0.5;
        assert!((crps_bin(&f, 0.5).unwrap() - want).abs() < 1e-12);
        // observation outside the range: F is 0.4 on [0,1) and 1 beyond,
        // the indicator stays 0 until x* = 3
        let want_out = 0.16 * 1.0 + 1.0 * 2.0;
        assert!((crps_bin(&f, 3.0).unwrap() - want_out).abs() < 1e-12);
    }

    #[test]
    fn crps_handles_discrete_mixture() {
        // point mass at 0: CRPS(F, x) = |x| exactly
        let m = Mixture::new(vec![Component::dirac(0.0, 1.0).unwrap()]).unwrap();
        assert!((crps_mixture(&m, 2.0).unwrap() - 2.0).abs() < 1e-6);
        assert!((crps_mixture(&m, -1.5).unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn crps_mixed_discrete_and_continuous() {
        // half a point mass at the observation cancels half the indicator:
        // CRPS(0.5 N(0,1) + 0.5 dirac(0), 0) = 0.25 CRPS(N(0,1), 0)
        let m = Mixture::new(vec![
            Component::norm(0.0, 1.0, 0.5).unwrap(),
            Component::dirac(0.0, 0.5).unwrap(),
        ])
        .unwrap();
        let want = 0.25 * 0.2336949772551091;
        assert!((crps_mixture(&m, 0.0).unwrap() - want).abs() < 1e-7);
    }

    #[test]
    fn interval_score_cases() {
        assert_eq!(interval_score(0.2, 1.0, 3.0, 2.0).unwrap(), 2.0);
        assert_eq!(interval_score(0.2, 1.0, 3.0, 4.0).unwrap(), 12.0);
        assert_eq!(interval_score(0.5, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(interval_score(0.2, 3.0, 1.0, 2.0).is_err());
        assert!(interval_score(1.2, 1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn interval_score_width_lower_bound() {
        for &(alpha, l, r, x) in &[(0.1, -1.0, 2.0, 0.5), (0.3, 0.0, 1.0, 3.0), (0.5, 1.0, 1.0, 0.0)] {
            let s = interval_score(alpha, l, r, x).unwrap();
            assert!(s >= r - l);
            if x >= l && x <= r {
                assert_eq!(s, r - l);
            } else {
                assert!(s > r - l);
            }
        }
    }

    #[test]
    fn wis_single_interval_cases() {
        let f = IntervalSet::new(2.0, vec![(0.2, 1.0, 3.0)]).unwrap();
        assert!((wis(&f, 2.0).unwrap() - 0.13333333333).abs() < 1e-9);
        assert!((wis(&f, 4.0).unwrap() - 1.46666666666).abs() < 1e-9);
    }

    #[test]
    fn wis_invariant_under_interval_reordering() {
        let a = IntervalSet::new(0.0, vec![(0.2, -1.0, 1.0), (0.5, -0.5, 0.5), (0.1, -2.0, 2.0)])
            .unwrap();
        let b = IntervalSet::new(0.0, vec![(0.1, -2.0, 2.0), (0.2, -1.0, 1.0), (0.5, -0.5, 0.5)])
            .unwrap();
        for x in [-3.0, 0.0, 0.7, 2.5] {
            assert_eq!(wis(&a, x).unwrap(), wis(&b, x).unwrap());
        }
    }

    #[test]
    fn wis_from_hub_levels_approximates_crps() {
        let m = std_normal();
        let levels = crate::hub_levels();
        let q = crate::representations::mixture_quantiles(&m, &levels).unwrap();
        let is = IntervalSet::from_quantiles(&q).unwrap();
        assert_eq!(is.intervals().len(), 11);
        let w = wis(&is, 0.0).unwrap();
        let c = crps_mixture(&m, 0.0).unwrap();
        assert!((w - c).abs() / c <= 0.10, "wis {w} vs crps {c}");
    }

    #[test]
    fn scores_are_translation_equivariant() {
        let shift = 7.25;
        let m = mdist2();
        let shifted = Mixture::new(vec![
            Component::norm(1.5 + shift, 1.0, 0.4).unwrap(),
            Component::norm(4.0 + shift, 2.0, 0.6).unwrap(),
        ])
        .unwrap();
        let x = 3.0;
        assert!(
            (log_score(&m, x).unwrap() - log_score(&shifted, x + shift).unwrap()).abs() < 1e-9
        );
        assert!(
            (crps_mixture(&m, x).unwrap() - crps_mixture(&shifted, x + shift).unwrap()).abs()
                < 1e-9
        );
        let q = crate::representations::mixture_quantiles(&m, &crate::hub_levels()).unwrap();
        let qs = crate::representations::mixture_quantiles(&shifted, &crate::hub_levels()).unwrap();
        let w = wis(&IntervalSet::from_quantiles(&q).unwrap(), x).unwrap();
        let ws = wis(&IntervalSet::from_quantiles(&qs).unwrap(), x + shift).unwrap();
        assert!((w - ws).abs() < 1e-9, "wis {w} vs shifted {ws}");
    }

    #[test]
    fn ks_stat_on_exact_quantile_grid() {
        let n = 20usize;
        let m = std_normal();
        let draws: Vec<f64> = (0..n)
            .map(|i| m.quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        let s = SampleForecast::new(draws).unwrap();
        let d = ks_stat(&s, |x| m.cdf(x));
        assert!((d - 0.5 / n as f64).abs() < 1e-7, "d = {d}");
    }

    #[test]
    fn ks_stat_degenerate_step_convention() {
        // a single draw at the jump of a step CDF: the curves agree on both
        // sides of the jump, so the sup distance is 0
        let s = SampleForecast::new(vec![0.0]).unwrap();
        let d = ks_stat(&s, |x| if x >= 0.0 { 1.0 } else { 0.0 });
        assert_eq!(d, 0.0);
    }

    #[test]
    fn ks_stat_weighted_sample() {
        // draws (1, 2) weighted (0.25, 0.75) against Unif(0, 3):
        // the largest gap is F(2-) = 2/3 against the ECDF left limit 0.25
        let s = SampleForecast::new_weighted(vec![1.0, 2.0], vec![0.25, 0.75]).unwrap();
        let d = ks_stat(&s, |x| (x / 3.0).clamp(0.0, 1.0));
        assert!((d - (2.0 / 3.0 - 0.25)).abs() < 1e-7, "d = {d}");
    }

    #[test]
    fn ks_stat_against_own_ecdf_is_zero() {
        let s = SampleForecast::new(vec![1.0, 4.0, 2.0, 8.0, 3.0]).unwrap();
        let d = ks_stat(&s, |x| s.ecdf(x));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn interval_set_construction_errors() {
        assert!(matches!(
            IntervalSet::new(0.0, vec![]),
            Err(ScoreError::EmptyIntervalSet)
        ));
        assert!(IntervalSet::new(0.0, vec![(0.2, 1.0, -1.0)]).is_err());
        assert!(IntervalSet::new(0.0, vec![(0.2, -1.0, 1.0), (0.2, -2.0, 2.0)]).is_err());
        // asymmetric level grids and missing medians are rejected
        let no_median = QuantileForecast::new(vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
        assert!(IntervalSet::from_quantiles(&no_median).is_err());
        let asymmetric =
            QuantileForecast::new(vec![0.25, 0.5, 0.8], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(IntervalSet::from_quantiles(&asymmetric).is_err());
    }

    #[test]
    fn crps_of_truncated_component_mixture() {
        // sanity: truncated lognormal CRPS stays finite and positive
        let m = Mixture::new(vec![Component::new_truncated(
            Family::Lnorm,
            &[1.0, 0.4],
            Some(0.0),
            Some(8.0),
            1.0,
        )
        .unwrap()])
        .unwrap();
        let c = crps_mixture(&m, 2.5).unwrap();
        assert!(c > 0.0 && c < 3.0);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn quadrature_crps_matches_oracle(
                mu in -10.0f64..10.0,
                sd in 0.2f64..3.0,
                z in -3.0f64..3.0,
            ) {
                let x = mu + sd * z;
                let m = Mixture::new(vec![Component::norm(mu, sd, 1.0).unwrap()]).unwrap();
                let got = crps_mixture(&m, x).unwrap();
                let want = normal_crps(mu, sd, x);
                prop_assert!((got - want).abs() < 1e-6);
            }

            #[test]
            fn ecdf_crps_matches_energy_form(
                draws in proptest::collection::vec(-20.0f64..20.0, 1..25),
                y in -25.0f64..25.0,
            ) {
                let s = SampleForecast::new(draws.clone()).unwrap();
                let n = draws.len() as f64;
                let e1: f64 = draws.iter().map(|d| (d - y).abs()).sum::<f64>() / n;
                let e2: f64 = draws.iter()
                    .flat_map(|a| draws.iter().map(move |b| (a - b).abs()))
                    .sum::<f64>() / (n * n);
                let want = e1 - 0.5 * e2;
                prop_assert!((crps_ecdf(&s, y).unwrap() - want).abs() < 1e-8);
            }
        }
    }
}

//! Mixture-distribution forecasting toolkit for collaborative forecast hubs.
//!
//! A forecast here is a probability distribution for a single future scalar
//! quantity. Hubs collect many such forecasts in one of a few submission
//! formats; this crate covers the whole pipeline around them:
//!
//! * [`distributions`] — parametric components and finite mixtures
//!   (evaluation, truncation, quantiles, sampling);
//! * [`representations`] — bin, quantile, and sample forecasts plus the
//!   conversions between them (discretization, ECDF, density approximations);
//! * [`scoring`] — proper scoring rules: log score, CRPS, interval score,
//!   weighted interval score, and the Kolmogorov-Smirnov statistic;
//! * [`ensemble`] — multi-model combination by mixture averaging or quantile
//!   averaging, with several weight estimators;
//! * [`fitting`] — fitting normal mixtures to bin, quantile, and sample
//!   forecasts for retrospective conversion;
//! * [`formats`] — parsing, validation, and serialization of the submission
//!   and truth file schemas.
//!
//! ```
//! use mixcast::{Component, Mixture};
//! use mixcast::scoring::{crps_mixture, log_score};
//!
//! let forecast = Mixture::new(vec![
//!     Component::lnorm(2.0, 1.0, 0.3)?,
//!     Component::norm(2.1, 1.0, 0.7)?,
//! ])?;
//! let observed = 3.0;
//! assert!((log_score(&forecast, observed)? - 1.547238).abs() < 1e-6);
//! assert!((crps_mixture(&forecast, observed)? - 0.634821).abs() < 1e-4);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// Negated comparisons like `!(x > 0.0)` are used throughout validation on
// purpose: they fail on NaN, which the un-negated forms would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod ensemble;
pub mod fitting;
pub mod formats;
pub mod representations;
pub mod scoring;

pub use distributions::{Component, DistError, Family, Mixture};
pub use representations::{BinForecast, QuantileForecast, RepError, SampleForecast};
pub use scoring::{IntervalSet, ScoreError};

/// The 23 quantile levels used for short-term hub submissions: a median
/// plus 11 symmetric central intervals.
pub fn hub_levels() -> Vec<f64> {
    let mut levels = vec![0.01, 0.025];
    let mut l: f64 = 0.05;
    while l < 0.951 {
        levels.push((l * 1000.0).round() / 1000.0);
        l += 0.05;
    }
    levels.push(0.975);
    levels.push(0.99);
    levels
}

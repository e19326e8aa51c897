//! Parametric component distributions and finite mixtures.
//!
//! A [`Mixture`] is a convex combination of [`Component`] distributions,
//! `p(x) = Σ_c w_c p_c(x)`, and is the central forecast object of this crate.
//! Components come from a fixed set of [`Family`] tags, take up to three
//! parameters, and may be truncated to an interval. All parameter validation
//! happens at construction; evaluation never fails on a valid component.
//!
//! Single-family evaluation is delegated to `statrs`; the mixture layer,
//! truncation, quantile inversion, and sampling live here. Both `Mixture`
//! and `Component` are immutable after construction and safe to share across
//! threads; sampling takes an explicit seed and owns its generator state.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{
    Beta, Binomial, Cauchy, ChiSquared, Continuous, ContinuousCDF, Discrete, DiscreteCDF, Exp,
    FisherSnedecor, Gamma, Hypergeometric, LogNormal, NegativeBinomial, Normal, Poisson,
    StudentsT, Uniform, Weibull,
};
use thiserror::Error;

/// Tolerance for mixture weights summing to one at construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Relative slack when deciding whether a real hits an integer support point.
const SUPPORT_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DistError {
    #[error("unknown distribution family `{0}`")]
    UnknownFamily(String),
    #[error("{family} takes {expected} parameter(s), got {got}")]
    ParameterArity {
        family: Family,
        expected: usize,
        got: usize,
    },
    #[error("{family}: {message}")]
    InvalidParameter { family: Family, message: String },
    #[error("invalid truncation [{lower:?}, {upper:?}]: {message}")]
    InvalidTruncation {
        lower: Option<f64>,
        upper: Option<f64>,
        message: String,
    },
    #[error("component weight {0} outside (0, 1]")]
    InvalidWeight(f64),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("mixture must contain at least one component")]
    EmptyMixture,
    #[error("quantile level {0} outside (0, 1)")]
    QuantileLevel(f64),
    #[error("failed to bracket quantile level {0}: degenerate mixture")]
    QuantileBracket(f64),
    #[error("empty model list")]
    EmptyModelList,
}

/// Distribution family tags accepted in mixture submissions.
///
/// Parameter meanings follow the conventions of R's `distr` package, which
/// established this tag set: e.g. `Lnorm` takes (meanlog, sdlog), `Gammad`
/// takes (scale, shape), `Lst` is `location + scale·T(df)`, and `Geom`
/// counts failures before the first success (support starting at 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Beta,
    Cauchy,
    Lnorm,
    Logis,
    Unif,
    Lst,
    Weibull,
    Fd,
    Norm,
    Chisq,
    Gammad,
    Exp,
    Binom,
    Dirac,
    Pois,
    Hyper,
    Nbinom,
    Geom,
}

impl Family {
    pub const ALL: [Family; 18] = [
        Family::Beta,
        Family::Cauchy,
        Family::Lnorm,
        Family::Logis,
        Family::Unif,
        Family::Lst,
        Family::Weibull,
        Family::Fd,
        Family::Norm,
        Family::Chisq,
        Family::Gammad,
        Family::Exp,
        Family::Binom,
        Family::Dirac,
        Family::Pois,
        Family::Hyper,
        Family::Nbinom,
        Family::Geom,
    ];

    /// Parses a family tag, case-insensitively. Unknown tags are rejected.
    pub fn parse(tag: &str) -> Result<Family, DistError> {
        let t = tag.trim();
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| DistError::UnknownFamily(tag.to_string()))
    }

    /// Canonical lowercase tag used in submission files.
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Beta => "beta",
            Family::Cauchy => "cauchy",
            Family::Lnorm => "lnorm",
            Family::Logis => "logis",
            Family::Unif => "unif",
            Family::Lst => "lst",
            Family::Weibull => "weibull",
            Family::Fd => "fd",
            Family::Norm => "norm",
            Family::Chisq => "chisq",
            Family::Gammad => "gammad",
            Family::Exp => "exp",
            Family::Binom => "binom",
            Family::Dirac => "dirac",
            Family::Pois => "pois",
            Family::Hyper => "hyper",
            Family::Nbinom => "nbinom",
            Family::Geom => "geom",
        }
    }

    /// Number of parameters the family takes.
    pub fn arity(&self) -> usize {
        match self {
            Family::Chisq | Family::Exp | Family::Dirac | Family::Pois | Family::Geom => 1,
            Family::Lst | Family::Hyper => 3,
            _ => 2,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            Family::Binom | Family::Dirac | Family::Pois | Family::Hyper | Family::Nbinom | Family::Geom
        )
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prebuilt single-family evaluator. Everything statrs covers is delegated;
/// `Logis`, `Geom` (R's failures-from-zero convention), and `Dirac` are
/// implemented directly.
#[derive(Debug, Clone)]
enum Dist {
    Beta(Beta),
    Cauchy(Cauchy),
    Lnorm(LogNormal),
    Logis { location: f64, scale: f64 },
    Unif(Uniform),
    Lst(StudentsT),
    Weibull(Weibull),
    Fd(FisherSnedecor),
    Norm(Normal),
    Chisq(ChiSquared),
    Gammad(Gamma),
    Exp(Exp),
    Binom(Binomial),
    Dirac { location: f64 },
    Pois(Poisson),
    Hyper(Hypergeometric),
    Nbinom(NegativeBinomial),
    Geom { p: f64 },
}

/// Interval probability from CDF and survival values at both endpoints:
/// the CDF difference is exact in the lower tail and the body, the survival
/// difference in the upper tail where the CDF rounds to 1.
pub(crate) fn stable_interval_mass(cdf_lo: f64, cdf_hi: f64, sf_lo: f64, sf_hi: f64) -> f64 {
    if cdf_lo > 0.99 {
        (sf_lo - sf_hi).max(0.0)
    } else {
        (cdf_hi - cdf_lo).max(0.0)
    }
}

/// Snaps `x` to a nonnegative integer support point if it is within
/// [`SUPPORT_SNAP`] of one, else `None`.
fn as_count(x: f64) -> Option<u64> {
    let r = x.round();
    if r >= 0.0 && (x - r).abs() <= SUPPORT_SNAP * x.abs().max(1.0) {
        Some(r as u64)
    } else {
        None
    }
}

impl Dist {
    fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            Dist::Beta(d) => d.cdf(x),
            Dist::Cauchy(d) => d.cdf(x),
            Dist::Lnorm(d) => d.cdf(x),
            Dist::Logis { location, scale } => {
                let z = (x - location) / scale;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Dist::Unif(d) => d.cdf(x),
            Dist::Lst(d) => d.cdf(x),
            Dist::Weibull(d) => d.cdf(x),
            Dist::Fd(d) => d.cdf(x),
            Dist::Norm(d) => d.cdf(x),
            Dist::Chisq(d) => d.cdf(x),
            Dist::Gammad(d) => d.cdf(x),
            Dist::Exp(d) => d.cdf(x),
            Dist::Binom(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.cdf(x.floor() as u64)
                }
            }
            Dist::Dirac { location } => {
                if x >= *location {
                    1.0
                } else {
                    0.0
                }
            }
            Dist::Pois(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.cdf(x.floor() as u64)
                }
            }
            Dist::Hyper(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.cdf(x.floor() as u64)
                }
            }
            Dist::Nbinom(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.cdf(x.floor() as u64)
                }
            }
            Dist::Geom { p } => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0 - (1.0 - p).powi(x.floor() as i32 + 1)
                }
            }
        }
    }

    /// Density for continuous families, probability mass for discrete ones.
    /// Discrete mass is nonzero only at (snapped) integer support points.
    fn pdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            Dist::Beta(d) => {
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Cauchy(d) => d.pdf(x),
            Dist::Lnorm(d) => {
                if x <= 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Logis { location, scale } => {
                let z = ((x - location) / scale).abs();
                let e = (-z).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            Dist::Unif(d) => d.pdf(x),
            Dist::Lst(d) => d.pdf(x),
            Dist::Weibull(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Fd(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Norm(d) => d.pdf(x),
            Dist::Chisq(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Gammad(d) => {
                if x <= 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Exp(d) => {
                if x < 0.0 {
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Dist::Binom(d) => as_count(x).map_or(0.0, |k| d.pmf(k)),
            Dist::Dirac { location } => {
                if (x - location).abs() <= SUPPORT_SNAP * location.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            Dist::Pois(d) => as_count(x).map_or(0.0, |k| d.pmf(k)),
            Dist::Hyper(d) => as_count(x).map_or(0.0, |k| d.pmf(k)),
            Dist::Nbinom(d) => as_count(x).map_or(0.0, |k| d.pmf(k)),
            Dist::Geom { p } => as_count(x).map_or(0.0, |k| p * (1.0 - p).powi(k as i32)),
        }
    }

    /// Survival function `P(X > x)`, precise in the upper tail where the
    /// CDF saturates at 1.
    fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            Dist::Beta(d) => d.sf(x),
            Dist::Cauchy(d) => d.sf(x),
            Dist::Lnorm(d) => d.sf(x),
            Dist::Logis { location, scale } => {
                let z = (x - location) / scale;
                if z <= 0.0 {
                    1.0 / (1.0 + z.exp())
                } else {
                    let e = (-z).exp();
                    e / (1.0 + e)
                }
            }
            Dist::Unif(d) => d.sf(x),
            Dist::Lst(d) => d.sf(x),
            Dist::Weibull(d) => d.sf(x),
            Dist::Fd(d) => d.sf(x),
            Dist::Norm(d) => d.sf(x),
            Dist::Chisq(d) => d.sf(x),
            Dist::Gammad(d) => d.sf(x),
            Dist::Exp(d) => d.sf(x),
            Dist::Binom(d) => {
                if x < 0.0 {
                    1.0
                } else {
                    d.sf(x.floor() as u64)
                }
            }
            Dist::Dirac { location } => {
                if x >= *location {
                    0.0
                } else {
                    1.0
                }
            }
            Dist::Pois(d) => {
                if x < 0.0 {
                    1.0
                } else {
                    d.sf(x.floor() as u64)
                }
            }
            Dist::Hyper(d) => {
                if x < 0.0 {
                    1.0
                } else {
                    d.sf(x.floor() as u64)
                }
            }
            Dist::Nbinom(d) => {
                if x < 0.0 {
                    1.0
                } else {
                    d.sf(x.floor() as u64)
                }
            }
            Dist::Geom { p } => {
                if x < 0.0 {
                    1.0
                } else {
                    (1.0 - p).powi(x.floor() as i32 + 1)
                }
            }
        }
    }

    /// Generalized inverse CDF: the smallest support value with CDF >= p.
    fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
        match self {
            Dist::Beta(d) => d.inverse_cdf(p),
            Dist::Cauchy(d) => d.inverse_cdf(p),
            Dist::Lnorm(d) => d.inverse_cdf(p),
            Dist::Logis { location, scale } => location + scale * (p / (1.0 - p)).ln(),
            Dist::Unif(d) => d.inverse_cdf(p),
            Dist::Lst(d) => d.inverse_cdf(p),
            Dist::Weibull(d) => d.inverse_cdf(p),
            Dist::Fd(d) => d.inverse_cdf(p),
            Dist::Norm(d) => d.inverse_cdf(p),
            Dist::Chisq(d) => d.inverse_cdf(p),
            Dist::Gammad(d) => d.inverse_cdf(p),
            Dist::Exp(d) => d.inverse_cdf(p),
            Dist::Binom(d) => d.inverse_cdf(p) as f64,
            Dist::Dirac { location } => *location,
            Dist::Pois(d) => d.inverse_cdf(p) as f64,
            Dist::Hyper(d) => d.inverse_cdf(p) as f64,
            Dist::Nbinom(d) => d.inverse_cdf(p) as f64,
            Dist::Geom { p: prob } => {
                if *prob >= 1.0 {
                    0.0
                } else {
                    // smallest k >= 0 with 1 - (1-prob)^(k+1) >= p
                    let k = ((1.0 - p).ln() / (1.0 - prob).ln()).ceil() - 1.0;
                    k.max(0.0)
                }
            }
        }
    }

    /// Integer support bounds for discrete families (used to enumerate CDF
    /// jump points). Continuous families return `None`.
    fn discrete_support(&self) -> Option<(f64, f64)> {
        match self {
            Dist::Binom(d) => Some((0.0, d.n() as f64)),
            Dist::Dirac { location } => Some((*location, *location)),
            Dist::Pois(_) | Dist::Nbinom(_) | Dist::Geom { .. } => Some((0.0, f64::INFINITY)),
            Dist::Hyper(d) => {
                let lo = (d.draws() + d.successes()).saturating_sub(d.population());
                Some((lo as f64, d.draws().min(d.successes()) as f64))
            }
            _ => None,
        }
    }
}

fn require_finite(family: Family, name: &str, v: f64) -> Result<(), DistError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DistError::InvalidParameter {
            family,
            message: format!("{name} must be finite, got {v}"),
        })
    }
}

fn require_positive(family: Family, name: &str, v: f64) -> Result<(), DistError> {
    require_finite(family, name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(DistError::InvalidParameter {
            family,
            message: format!("{name} must be > 0, got {v}"),
        })
    }
}

fn require_count(family: Family, name: &str, v: f64) -> Result<u64, DistError> {
    require_finite(family, name, v)?;
    if v >= 0.0 && v.fract().abs() <= 1e-9 {
        Ok(v.round() as u64)
    } else {
        Err(DistError::InvalidParameter {
            family,
            message: format!("{name} must be a nonnegative integer, got {v}"),
        })
    }
}

fn invalid<T>(family: Family, message: String) -> Result<T, DistError> {
    Err(DistError::InvalidParameter { family, message })
}

fn build_dist(family: Family, params: &[f64]) -> Result<Dist, DistError> {
    if params.len() != family.arity() {
        return Err(DistError::ParameterArity {
            family,
            expected: family.arity(),
            got: params.len(),
        });
    }
    let p = params;
    let dist = match family {
        Family::Beta => {
            require_positive(family, "shape1", p[0])?;
            require_positive(family, "shape2", p[1])?;
            Dist::Beta(Beta::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Cauchy => {
            require_finite(family, "location", p[0])?;
            require_positive(family, "scale", p[1])?;
            Dist::Cauchy(Cauchy::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Lnorm => {
            require_finite(family, "meanlog", p[0])?;
            require_positive(family, "sdlog", p[1])?;
            Dist::Lnorm(LogNormal::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Logis => {
            require_finite(family, "location", p[0])?;
            require_positive(family, "scale", p[1])?;
            Dist::Logis {
                location: p[0],
                scale: p[1],
            }
        }
        Family::Unif => {
            require_finite(family, "min", p[0])?;
            require_finite(family, "max", p[1])?;
            if p[0] >= p[1] {
                return invalid(family, format!("min {} must be < max {}", p[0], p[1]));
            }
            Dist::Unif(Uniform::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Lst => {
            require_finite(family, "location", p[0])?;
            require_positive(family, "scale", p[1])?;
            require_positive(family, "df", p[2])?;
            Dist::Lst(StudentsT::new(p[0], p[1], p[2]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Weibull => {
            require_positive(family, "shape", p[0])?;
            require_positive(family, "scale", p[1])?;
            Dist::Weibull(Weibull::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Fd => {
            require_positive(family, "df1", p[0])?;
            require_positive(family, "df2", p[1])?;
            Dist::Fd(FisherSnedecor::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Norm => {
            require_finite(family, "mean", p[0])?;
            require_positive(family, "sd", p[1])?;
            Dist::Norm(Normal::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Chisq => {
            require_positive(family, "df", p[0])?;
            Dist::Chisq(ChiSquared::new(p[0]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Gammad => {
            // R's distr convention: param1 = scale, param2 = shape.
            require_positive(family, "scale", p[0])?;
            require_positive(family, "shape", p[1])?;
            Dist::Gammad(Gamma::new(p[1], 1.0 / p[0]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Exp => {
            require_positive(family, "rate", p[0])?;
            Dist::Exp(Exp::new(p[0]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Binom => {
            let n = require_count(family, "size", p[0])?;
            require_finite(family, "prob", p[1])?;
            if !(0.0..=1.0).contains(&p[1]) {
                return invalid(family, format!("prob {} outside [0, 1]", p[1]));
            }
            Dist::Binom(Binomial::new(p[1], n).map_err(|e| to_param_err(family, e))?)
        }
        Family::Dirac => {
            require_finite(family, "location", p[0])?;
            Dist::Dirac { location: p[0] }
        }
        Family::Pois => {
            require_positive(family, "lambda", p[0])?;
            Dist::Pois(Poisson::new(p[0]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Hyper => {
            let m = require_count(family, "m", p[0])?;
            let n = require_count(family, "n", p[1])?;
            let k = require_count(family, "k", p[2])?;
            if k > m + n {
                return invalid(family, format!("k {} exceeds m + n = {}", k, m + n));
            }
            Dist::Hyper(Hypergeometric::new(m + n, m, k).map_err(|e| to_param_err(family, e))?)
        }
        Family::Nbinom => {
            require_positive(family, "n", p[0])?;
            require_finite(family, "p", p[1])?;
            if !(p[1] > 0.0 && p[1] <= 1.0) {
                return invalid(family, format!("p {} outside (0, 1]", p[1]));
            }
            Dist::Nbinom(NegativeBinomial::new(p[0], p[1]).map_err(|e| to_param_err(family, e))?)
        }
        Family::Geom => {
            require_finite(family, "prob", p[0])?;
            if !(p[0] > 0.0 && p[0] <= 1.0) {
                return invalid(family, format!("prob {} outside (0, 1]", p[0]));
            }
            Dist::Geom { p: p[0] }
        }
    };
    Ok(dist)
}

fn to_param_err<E: std::fmt::Display>(family: Family, e: E) -> DistError {
    DistError::InvalidParameter {
        family,
        message: e.to_string(),
    }
}

/// Cached truncation state: base CDF at the limits and the renormalizing
/// mass, computed once at construction.
#[derive(Debug, Clone, Copy)]
struct Trunc {
    f_lo: f64,
    mass: f64,
}

const NO_TRUNC: Trunc = Trunc { f_lo: 0.0, mass: 1.0 };

/// One parametric component of a mixture: a family, its parameters, optional
/// truncation limits, and the weight it carries in the mixture.
///
/// Truncation renormalizes the distribution to the mass on `(lower, upper]`;
/// the renormalization constant is computed once here. Weights lie in
/// `(0, 1]`.
#[derive(Debug, Clone)]
pub struct Component {
    family: Family,
    params: Vec<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    weight: f64,
    dist: Dist,
    trunc: Trunc,
}

impl PartialEq for Component {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.params == other.params
            && self.lower == other.lower
            && self.upper == other.upper
            && self.weight == other.weight
    }
}

impl Component {
    pub fn new(family: Family, params: &[f64], weight: f64) -> Result<Self, DistError> {
        Self::new_truncated(family, params, None, None, weight)
    }

    pub fn new_truncated(
        family: Family,
        params: &[f64],
        lower: Option<f64>,
        upper: Option<f64>,
        weight: f64,
    ) -> Result<Self, DistError> {
        if !(weight > 0.0 && weight <= 1.0) || !weight.is_finite() {
            return Err(DistError::InvalidWeight(weight));
        }
        let dist = build_dist(family, params)?;
        let trunc = match (lower, upper) {
            (None, None) => NO_TRUNC,
            _ => {
                for v in [lower, upper].into_iter().flatten() {
                    if !v.is_finite() {
                        return Err(DistError::InvalidTruncation {
                            lower,
                            upper,
                            message: "limits must be finite".into(),
                        });
                    }
                }
                if let (Some(lo), Some(hi)) = (lower, upper) {
                    if lo >= hi {
                        return Err(DistError::InvalidTruncation {
                            lower,
                            upper,
                            message: "lower must be < upper".into(),
                        });
                    }
                }
                let f_lo = lower.map_or(0.0, |lo| dist.cdf(lo));
                let f_hi = upper.map_or(1.0, |hi| dist.cdf(hi));
                let mass = f_hi - f_lo;
                if !(mass > 0.0) {
                    return Err(DistError::InvalidTruncation {
                        lower,
                        upper,
                        message: "no probability mass on the truncation interval".into(),
                    });
                }
                Trunc { f_lo, mass }
            }
        };
        Ok(Component {
            family,
            params: params.to_vec(),
            lower,
            upper,
            weight,
            dist,
            trunc,
        })
    }

    /// Normal component, the workhorse of the fitting module.
    pub fn norm(mean: f64, sd: f64, weight: f64) -> Result<Self, DistError> {
        Self::new(Family::Norm, &[mean, sd], weight)
    }

    pub fn lnorm(meanlog: f64, sdlog: f64, weight: f64) -> Result<Self, DistError> {
        Self::new(Family::Lnorm, &[meanlog, sdlog], weight)
    }

    pub fn unif(min: f64, max: f64, weight: f64) -> Result<Self, DistError> {
        Self::new(Family::Unif, &[min, max], weight)
    }

    pub fn dirac(location: f64, weight: f64) -> Result<Self, DistError> {
        Self::new(Family::Dirac, &[location], weight)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lower(&self) -> Option<f64> {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Same component with a different mixture weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self, DistError> {
        if !(weight > 0.0 && weight <= 1.0) || !weight.is_finite() {
            return Err(DistError::InvalidWeight(weight));
        }
        let mut c = self.clone();
        c.weight = weight;
        Ok(c)
    }

    pub fn is_discrete(&self) -> bool {
        self.family.is_discrete()
    }

    /// Component CDF with truncation applied; 0 at and below the lower
    /// limit, exactly 1 at and above the upper limit.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if let Some(lo) = self.lower {
            if x <= lo {
                return 0.0;
            }
        }
        if let Some(hi) = self.upper {
            if x >= hi {
                return 1.0;
            }
        }
        ((self.dist.cdf(x) - self.trunc.f_lo) / self.trunc.mass).clamp(0.0, 1.0)
    }

    /// Density (or probability mass) with truncation applied: the base value
    /// divided by the truncation mass on `(lower, upper]`, zero outside.
    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if let Some(lo) = self.lower {
            if x <= lo {
                return 0.0;
            }
        }
        if let Some(hi) = self.upper {
            if x > hi {
                return 0.0;
            }
        }
        self.dist.pdf(x) / self.trunc.mass
    }

    /// Probability mass on `(lo, hi]` with truncation applied, evaluated
    /// through the survival function when both bounds sit in the upper tail
    /// so that far-tail bins keep their tiny but nonzero masses.
    pub fn prob_between(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let lo = match self.lower {
            Some(l) => lo.max(l),
            None => lo,
        };
        let hi = match self.upper {
            Some(u) => hi.min(u),
            None => hi,
        };
        if !(hi > lo) {
            return 0.0;
        }
        let raw = stable_interval_mass(
            self.dist.cdf(lo),
            self.dist.cdf(hi),
            self.dist.sf(lo),
            self.dist.sf(hi),
        );
        (raw / self.trunc.mass).clamp(0.0, 1.0)
    }

    /// Generalized inverse of the truncated CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = self.trunc.f_lo + p.clamp(0.0, 1.0) * self.trunc.mass;
        let q = self.dist.quantile(target);
        // Keep inverse-CDF round-off inside the truncation interval.
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => q.clamp(lo, hi),
            (Some(lo), None) => q.max(lo),
            (None, Some(hi)) => q.min(hi),
            (None, None) => q,
        }
    }

    /// Integer jump points of the truncated CDF inside `[lo, hi]`, for
    /// piecewise integration. Empty for continuous components.
    fn jump_points(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let Some((s_lo, s_hi)) = self.dist.discrete_support() else {
            return;
        };
        if let Dist::Dirac { location } = self.dist {
            if location >= lo && location <= hi {
                out.push(location);
            }
            return;
        }
        let lo = lo.max(s_lo).max(self.lower.map_or(f64::NEG_INFINITY, |l| l.floor()));
        let hi = hi.min(s_hi).min(self.upper.map_or(f64::INFINITY, |u| u.ceil()));
        if lo > hi {
            return;
        }
        let mut k = lo.ceil();
        while k <= hi {
            out.push(k);
            k += 1.0;
        }
    }
}

/// A finite mixture distribution: components with positive weights that sum
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<Component>,
}

impl Mixture {
    /// Builds a mixture, requiring the weights to sum to 1 within
    /// [`WEIGHT_SUM_TOL`].
    pub fn new(components: Vec<Component>) -> Result<Self, DistError> {
        if components.is_empty() {
            return Err(DistError::EmptyMixture);
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DistError::WeightSum(sum));
        }
        Ok(Mixture { components })
    }

    /// Builds a mixture, rescaling the weights to sum to exactly 1. Parsed
    /// text weights carry rounding, so submission parsing goes through here.
    pub fn new_normalized(components: Vec<Component>) -> Result<Self, DistError> {
        if components.is_empty() {
            return Err(DistError::EmptyMixture);
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(DistError::WeightSum(sum));
        }
        let mut components: Vec<Component> = components
            .into_iter()
            .map(|mut c| {
                c.weight /= sum;
                c
            })
            .collect();
        // pin the left-to-right sum to exactly 1 so normalization is
        // idempotent across serialize/parse round trips
        let n = components.len();
        let head: f64 = components[..n - 1].iter().map(|c| c.weight).sum();
        let last = 1.0 - head;
        if last > 0.0 && last <= 1.0 {
            components[n - 1].weight = last;
        }
        Ok(Mixture { components })
    }

    /// Single-component mixture.
    pub fn single(component: Component) -> Result<Self, DistError> {
        Self::new_normalized(vec![component.with_weight(1.0)?])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn has_discrete(&self) -> bool {
        self.components.iter().any(|c| c.is_discrete())
    }

    /// Mixture density `Σ_c w_c p_c(x)`. Discrete components contribute
    /// probability mass at their support points and zero elsewhere.
    /// `NaN` propagates; the density at ±∞ is 0.
    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        self.components.iter().map(|c| c.weight * c.pdf(x)).sum()
    }

    /// Probability the mixture assigns to `(lo, hi]`, tail-stable.
    pub fn prob_between(&self, lo: f64, hi: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.prob_between(lo, hi))
            .sum()
    }

    /// Mixture CDF `Σ_c w_c F_c(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        self.components.iter().map(|c| c.weight * c.cdf(x)).sum()
    }

    /// Quantile as the generalized inverse `inf { x : F(x) >= p }`,
    /// by bisection on the CDF.
    ///
    /// The initial bracket comes from the component-wise quantiles: the
    /// mixture quantile always lies between the smallest and largest
    /// component quantile at the same level. Works for any family mix,
    /// including multimodal shapes and step CDFs.
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::QuantileLevel(p));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            let q = c.quantile(p);
            if !q.is_finite() {
                return Err(DistError::QuantileBracket(p));
            }
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if self.cdf(lo) >= p {
            return Ok(lo);
        }
        // Float fuzz can leave cdf(hi) a hair under p; widen geometrically.
        let mut step = (hi - lo).max(1e-12);
        let mut tries = 0;
        while self.cdf(hi) < p {
            hi += step;
            step *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(DistError::QuantileBracket(p));
            }
        }
        // Invariant: cdf(lo) < p <= cdf(hi).
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break; // no representable point between the brackets
            }
            let f = self.cdf(mid);
            if f >= p {
                hi = mid;
                if f - p <= 1e-12 {
                    break;
                }
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-10 * hi.abs().max(lo.abs()).max(1.0) {
                break;
            }
        }
        Ok(hi)
    }

    /// Draws `n` values: a component is selected with probability equal to
    /// its weight, then one value is drawn from it by inverse-CDF (which
    /// respects truncation). Deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = self.components.last().expect("nonempty mixture");
                for c in &self.components {
                    acc += c.weight;
                    if pick <= acc {
                        chosen = c;
                        break;
                    }
                }
                let u: f64 = rng.random();
                chosen.quantile(u.clamp(1e-16, 1.0 - 1e-16))
            })
            .collect()
    }

    /// Flattens a weighted list of mixtures into one mixture whose component
    /// weights are the products of outer and inner weights. The result's
    /// density equals the weighted sum of the input densities pointwise.
    pub fn flatten(outer: &[(Mixture, f64)]) -> Result<Mixture, DistError> {
        if outer.is_empty() {
            return Err(DistError::EmptyModelList);
        }
        let sum: f64 = outer.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DistError::WeightSum(sum));
        }
        let mut components = Vec::new();
        for (m, w) in outer {
            if !(*w > 0.0) {
                return Err(DistError::InvalidWeight(*w));
            }
            for c in &m.components {
                let mut c = c.clone();
                c.weight *= w;
                components.push(c);
            }
        }
        Mixture::new_normalized(components)
    }

    /// Union of the discrete components' CDF jump points within `[lo, hi]`,
    /// sorted and deduplicated. Empty for purely continuous mixtures.
    pub(crate) fn discrete_jumps(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.components {
            c.jump_points(lo, hi, &mut out);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }
}

//! Multi-model ensembles: mixture averaging over mixture forecasts,
//! per-level averaging over quantile forecasts, and weight estimators
//! (equal, posterior model probability, CRPS minimization, EM likelihood).
//!
//! All estimators are pure functions of their inputs; weights always come
//! back on the simplex.

use crate::distributions::{DistError, Mixture};
use crate::representations::{QuantileForecast, RepError};
use crate::scoring::{crps_mixture, ScoreError};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnsembleError {
    #[error("{models} models but {weights} weights")]
    LengthMismatch { models: usize, weights: usize },
    #[error("weights must be nonnegative and sum to 1, got sum {0}")]
    BadWeights(f64),
    #[error("model list is empty")]
    Empty,
    #[error("all model evaluations are zero at the observation")]
    AllZero,
    #[error("observation {0} has zero density under every model")]
    ZeroDensityObservation(f64),
    #[error("no observations provided")]
    NoObservations,
    #[error("need at least two models, got {0}")]
    TooFewModels(usize),
    #[error("quantile forecasts must share the same level grid")]
    LevelGridMismatch,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

fn check_weights(models: usize, weights: &[f64]) -> Result<(), EnsembleError> {
    if models == 0 {
        return Err(EnsembleError::Empty);
    }
    if models != weights.len() {
        return Err(EnsembleError::LengthMismatch {
            models,
            weights: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(EnsembleError::BadWeights(f64::NAN));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EnsembleError::BadWeights(sum));
    }
    Ok(())
}

/// Model-averaging ensemble: the weighted mixture of the component
/// forecasts, `p^E = Σ_m w_m p_m`. Models with weight zero are dropped.
pub fn ma_ensemble(models: &[Mixture], weights: &[f64]) -> Result<Mixture, EnsembleError> {
    check_weights(models.len(), weights)?;
    let kept: Vec<(Mixture, f64)> = models
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(m, &w)| (m.clone(), w))
        .collect();
    if kept.is_empty() {
        return Err(EnsembleError::BadWeights(0.0));
    }
    // renormalize dropped zeros away (sum is already 1 within tolerance)
    let sum: f64 = kept.iter().map(|(_, w)| w).sum();
    let kept: Vec<(Mixture, f64)> = kept.into_iter().map(|(m, w)| (m, w / sum)).collect();
    Ok(Mixture::flatten(&kept)?)
}

/// How the per-level quantile ensemble combines its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileAverage {
    /// Weighted mean of the values at each level.
    Mean,
    /// Per-level median (ignores the weights).
    Median,
}

/// Quantile-averaging ensemble: all models must report the same level grid;
/// each ensemble value is the weighted mean (or median) of the models'
/// values at that level.
pub fn quantile_average(
    models: &[QuantileForecast],
    weights: &[f64],
    method: QuantileAverage,
) -> Result<QuantileForecast, EnsembleError> {
    check_weights(models.len(), weights)?;
    let levels = models[0].levels();
    for m in &models[1..] {
        if m.levels() != levels {
            return Err(EnsembleError::LevelGridMismatch);
        }
    }
    let n = levels.len();
    let mut values = Vec::with_capacity(n);
    match method {
        QuantileAverage::Mean => {
            for k in 0..n {
                values.push(
                    models
                        .iter()
                        .zip(weights)
                        .map(|(m, &w)| w * m.values()[k])
                        .sum(),
                );
            }
        }
        QuantileAverage::Median => {
            for k in 0..n {
                let mut col: Vec<f64> = models.iter().map(|m| m.values()[k]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = col.len() / 2;
                values.push(if col.len() % 2 == 1 {
                    col[mid]
                } else {
                    0.5 * (col[mid - 1] + col[mid])
                });
            }
        }
    }
    // a mean of nondecreasing sequences is nondecreasing; so is a pointwise
    // median — any violation here is a bug, not an input problem
    Ok(QuantileForecast::new(levels.to_vec(), values)?)
}

/// Which model evaluation the posterior-model-probability weights use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PmpMode {
    /// Densities at the observation (equal priors): `w_t = p_t(x*) / Σ p_k(x*)`.
    #[default]
    Density,
    /// CDF values at the observation: `w_t = F_t(x*) / Σ F_k(x*)`.
    Cdf,
}

/// Posterior-model-probability weights under equal priors.
pub fn pmp_weights(
    models: &[Mixture],
    x_star: f64,
    mode: PmpMode,
) -> Result<Vec<f64>, EnsembleError> {
    if models.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let evals: Vec<f64> = models
        .iter()
        .map(|m| match mode {
            PmpMode::Density => m.pdf(x_star),
            PmpMode::Cdf => m.cdf(x_star),
        })
        .collect();
    let total: f64 = evals.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(EnsembleError::AllZero);
    }
    Ok(evals.into_iter().map(|e| e / total).collect())
}

/// Result of an iterative weight search.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    /// Mean score of the ensemble at the returned weights.
    pub objective: f64,
    /// False when the iteration budget ran out before the improvement
    /// tolerance was met; the best weights found are still returned.
    pub converged: bool,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i;
            theta = t;
        }
    }
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Weights minimizing the mean ensemble CRPS over the observations, by
/// projected gradient descent with numeric gradients, restarted from the
/// equal-weight point and from each vertex of the simplex.
pub fn crps_min_weights(
    models: &[Mixture],
    observations: &[f64],
) -> Result<WeightFit, EnsembleError> {
    if models.len() < 2 {
        return Err(EnsembleError::TooFewModels(models.len()));
    }
    if observations.is_empty() {
        return Err(EnsembleError::NoObservations);
    }
    let t = models.len();
    let objective = |w: &[f64]| -> Result<f64, EnsembleError> {
        let sum: f64 = w.iter().sum();
        let wn: Vec<f64> = w.iter().map(|x| x / sum).collect();
        let ens = ma_ensemble(models, &wn)?;
        let mut acc = 0.0;
        for &x in observations {
            acc += crps_mixture(&ens, x)?;
        }
        Ok(acc / observations.len() as f64)
    };

    let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / t as f64; t]];
    for k in 0..t {
        let mut v = vec![1e-6; t];
        v[k] = 1.0 - 1e-6 * (t - 1) as f64;
        starts.push(v);
    }

    const BUDGET: usize = 500;
    let mut best_w = starts[0].clone();
    let mut best_f = objective(&best_w)?;
    let mut converged = false;

    let mut spent = 0usize;
    for start in starts {
        let mut w = project_simplex(&start);
        let mut f = objective(&w)?;
        let mut step = 0.5;
        while spent < BUDGET {
            spent += 1;
            // central-difference gradient of the renormalized objective
            let eps = 1e-5;
            let mut grad = vec![0.0; t];
            for i in 0..t {
                let mut wp = w.clone();
                wp[i] += eps;
                let mut wm = w.clone();
                wm[i] = (wm[i] - eps).max(0.0);
                grad[i] = (objective(&wp)? - objective(&wm)?) / (wp[i] - wm[i]);
            }
            let mut improved = false;
            let mut s = step;
            for _ in 0..12 {
                let cand: Vec<f64> = w.iter().zip(&grad).map(|(&wi, &g)| wi - s * g).collect();
                let cand = project_simplex(&cand);
                let fc = objective(&cand)?;
                if fc < f - 1e-12 {
                    w = cand;
                    f = fc;
                    step = s * 1.5;
                    improved = true;
                    break;
                }
                s *= 0.5;
            }
            if !improved {
                converged = true;
                break;
            }
        }
        if f < best_f {
            best_f = f;
            best_w = w;
        }
        if spent >= BUDGET {
            break;
        }
    }
    Ok(WeightFit {
        weights: project_simplex(&best_w),
        objective: best_f,
        converged,
    })
}

/// Weights maximizing the observed log-likelihood `Σ_j log Σ_m w_m p_m(x_j)`
/// by the standard mixture-weight EM update from a uniform start. The
/// log-likelihood is nondecreasing at every iteration; iteration stops when
/// its relative change drops below `tol` or `max_iter` is reached.
pub fn em_weights(
    models: &[Mixture],
    observations: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>, EnsembleError> {
    if models.is_empty() {
        return Err(EnsembleError::Empty);
    }
    if observations.is_empty() {
        return Err(EnsembleError::NoObservations);
    }
    let t = models.len();
    let dens: Vec<Vec<f64>> = observations
        .iter()
        .map(|&x| models.iter().map(|m| m.pdf(x)).collect())
        .collect();
    for (j, row) in dens.iter().enumerate() {
        if !row.iter().any(|&d| d > 0.0) {
            return Err(EnsembleError::ZeroDensityObservation(observations[j]));
        }
    }
    let j_count = observations.len() as f64;
    let mut w = vec![1.0 / t as f64; t];
    let loglik = |w: &[f64]| -> f64 {
        dens.iter()
            .map(|row| {
                row.iter()
                    .zip(w)
                    .map(|(&d, &wi)| d * wi)
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE)
                    .ln()
            })
            .sum()
    };
    let mut ll = loglik(&w);
    for _ in 0..max_iter {
        let mut next = vec![0.0; t];
        for row in &dens {
            let denom: f64 = row.iter().zip(&w).map(|(&d, &wi)| d * wi).sum();
            if denom > 0.0 {
                for (i, &d) in row.iter().enumerate() {
                    next[i] += w[i] * d / denom;
                }
            }
        }
        for v in &mut next {
            *v /= j_count;
        }
        let ll_next = loglik(&next);
        debug_assert!(ll_next >= ll - 1e-9, "EM log-likelihood decreased");
        w = next;
        let rel = if ll_next == ll {
            0.0
        } else {
            (ll_next - ll).abs() / ll.abs().max(1e-12)
        };
        ll = ll_next;
        if rel < tol {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Component;
    use crate::scoring::log_score;

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

    #[test]
    fn worked_ensemble_scores() {
        let models = [mdist1(), mdist2()];
        let w = pmp_weights(&models, 3.0, PmpMode::Cdf).unwrap();
        assert!((w[0] - 0.5286434).abs() < 1e-6, "w1 = {}", w[0]);
        assert!((w[1] - 0.4713566).abs() < 1e-6);
        let ens = ma_ensemble(&models, &w).unwrap();
        assert!((log_score(&ens, 3.0).unwrap() - 1.678156).abs() < 1e-5);
        assert!((crps_mixture(&ens, 3.0).unwrap() - 0.5486368).abs() < 1e-4);
    }

    #[test]
    fn single_model_ensemble_is_identity() {
        let m = mdist1();
        let ens = ma_ensemble(std::slice::from_ref(&m), &[1.0]).unwrap();
        for x in [-1.0, 0.5, 3.0, 10.0] {
            assert_eq!(ens.pdf(x), m.pdf(x));
        }
    }

    #[test]
    fn zero_weight_models_are_dropped() {
        let models = [mdist1(), mdist2()];
        let ens = ma_ensemble(&models, &[1.0, 0.0]).unwrap();
        assert_eq!(ens.components().len(), 2);
        for x in [0.0, 2.0, 5.0] {
            assert!((ens.pdf(x) - models[0].pdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_cdf_is_weighted_sum_pointwise() {
        let models = [mdist1(), mdist2()];
        let w = [0.3, 0.7];
        let ens = ma_ensemble(&models, &w).unwrap();
        for x in [-2.0, 0.0, 1.7, 3.0, 8.0] {
            let direct = w[0] * models[0].cdf(x) + w[1] * models[1].cdf(x);
            assert!((ens.cdf(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn ma_rejects_mismatched_input() {
        let models = [mdist1(), mdist2()];
        assert!(ma_ensemble(&models, &[1.0]).is_err());
        assert!(ma_ensemble(&models, &[0.6, 0.6]).is_err());
        assert!(ma_ensemble(&[], &[]).is_err());
    }

    #[test]
    fn quantile_mean_average() {
        let a = QuantileForecast::new(vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
        let b = QuantileForecast::new(vec![0.25, 0.75], vec![3.0, 5.0]).unwrap();
        let e = quantile_average(&[a, b], &[0.5, 0.5], QuantileAverage::Mean).unwrap();
        assert_eq!(e.values(), &[2.0, 4.0]);
    }

    #[test]
    fn quantile_average_identity_for_single_model() {
        let a = QuantileForecast::new(vec![0.1, 0.5, 0.9], vec![1.0, 2.0, 3.0]).unwrap();
        let e = quantile_average(std::slice::from_ref(&a), &[1.0], QuantileAverage::Mean).unwrap();
        assert_eq!(e, a);
    }

    #[test]
    fn quantile_median_average() {
        let models: Vec<QuantileForecast> = [1.0, 2.0, 10.0]
            .iter()
            .map(|&v| QuantileForecast::new(vec![0.5], vec![v]).unwrap())
            .collect();
        let e = quantile_average(&models, &[1.0 / 3.0; 3], QuantileAverage::Median).unwrap();
        assert_eq!(e.values(), &[2.0]);
    }

    #[test]
    fn quantile_average_rejects_level_mismatch() {
        let a = QuantileForecast::new(vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
        let b = QuantileForecast::new(vec![0.2, 0.8], vec![3.0, 5.0]).unwrap();
        assert!(matches!(
            quantile_average(&[a, b], &[0.5, 0.5], QuantileAverage::Mean),
            Err(EnsembleError::LevelGridMismatch)
        ));
    }

    #[test]
    fn quantile_mean_commutes_with_shift() {
        let a = QuantileForecast::new(vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
        let b = QuantileForecast::new(vec![0.25, 0.75], vec![3.0, 5.0]).unwrap();
        let shift = 4.5;
        let shifted: Vec<QuantileForecast> = [&a, &b]
            .iter()
            .map(|q| {
                QuantileForecast::new(
                    q.levels().to_vec(),
                    q.values().iter().map(|v| v + shift).collect(),
                )
                .unwrap()
            })
            .collect();
        let e = quantile_average(&[a, b], &[0.3, 0.7], QuantileAverage::Mean).unwrap();
        let es = quantile_average(&shifted, &[0.3, 0.7], QuantileAverage::Mean).unwrap();
        for (v, vs) in e.values().iter().zip(es.values()) {
            assert!((v + shift - vs).abs() < 1e-12);
        }
    }

    #[test]
    fn pmp_density_mode_hand_ratio() {
        let models = [mdist1(), mdist2()];
        let w = pmp_weights(&models, 3.0, PmpMode::Density).unwrap();
        let p1 = (-1.547238f64).exp();
        let p2 = (-1.848796f64).exp();
        assert!((w[0] - p1 / (p1 + p2)).abs() < 1e-4);
        assert!((w[1] - p2 / (p1 + p2)).abs() < 1e-4);
    }

    #[test]
    fn pmp_identical_models_are_uniform() {
        let models = vec![mdist1(); 4];
        for mode in [PmpMode::Density, PmpMode::Cdf] {
            let w = pmp_weights(&models, 3.0, mode).unwrap();
            for wi in &w {
                assert!((wi - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmp_sums_to_one_and_permutes() {
        let models = [mdist1(), mdist2()];
        let w = pmp_weights(&models, 3.0, PmpMode::Density).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let rev = [mdist2(), mdist1()];
        let wr = pmp_weights(&rev, 3.0, PmpMode::Density).unwrap();
        assert!((w[0] - wr[1]).abs() < 1e-15);
        assert!((w[1] - wr[0]).abs() < 1e-15);
    }

    #[test]
    fn pmp_all_zero_evaluations_error() {
        let models = [
            Mixture::new(vec![Component::unif(0.0, 1.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::unif(2.0, 3.0, 1.0).unwrap()]).unwrap(),
        ];
        // below every support, both densities and CDFs vanish
        assert!(matches!(
            pmp_weights(&models, -5.0, PmpMode::Density),
            Err(EnsembleError::AllZero)
        ));
        assert!(matches!(
            pmp_weights(&models, -5.0, PmpMode::Cdf),
            Err(EnsembleError::AllZero)
        ));
    }

    #[test]
    fn crps_min_three_models_beats_coarse_simplex_grid() {
        let models = [
            Mixture::new(vec![Component::norm(-2.0, 1.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::norm(1.0, 1.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::norm(5.0, 1.5, 1.0).unwrap()]).unwrap(),
        ];
        let obs = [0.5, 1.2, 0.8, 1.6];
        let fit = crps_min_weights(&models, &obs).unwrap();
        let objective = |w: &[f64]| -> f64 {
            let ens = ma_ensemble(&models, w).unwrap();
            obs.iter()
                .map(|&x| crps_mixture(&ens, x).unwrap())
                .sum::<f64>()
                / obs.len() as f64
        };
        for i in 0..=10 {
            for j in 0..=(10 - i) {
                let k = 10 - i - j;
                let w = [i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0];
                if w.iter().all(|&x| x > 0.0) {
                    assert!(
                        fit.objective <= objective(&w) + 1e-6,
                        "grid point {w:?} beats the optimizer"
                    );
                }
            }
        }
        // the middle model explains the observations
        assert!(fit.weights[1] > 0.5, "weights = {:?}", fit.weights);
    }

    #[test]
    fn em_single_observation_one_step_equals_pmp_density() {
        let models = [mdist1(), mdist2()];
        let w_em = em_weights(&models, &[3.0], 1, 1e-8).unwrap();
        let w_pmp = pmp_weights(&models, 3.0, PmpMode::Density).unwrap();
        for (a, b) in w_em.iter().zip(&w_pmp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn em_identical_models_stay_uniform() {
        let models = vec![mdist1(); 3];
        let w = em_weights(&models, &[1.0, 2.0, 3.0], 200, 1e-10).unwrap();
        for wi in &w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn em_favors_the_generating_model() {
        let models = [
            Mixture::new(vec![Component::norm(0.0, 1.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::norm(8.0, 1.0, 1.0).unwrap()]).unwrap(),
        ];
        // observations clustered at the second model's mode
        let obs = [7.6, 7.9, 8.0, 8.2, 8.4, 7.8];
        let w = em_weights(&models, &obs, 1000, 1e-8).unwrap();
        assert!(w[1] > 0.95, "w = {w:?}");
        // grid check: the EM solution's likelihood beats any coarse grid point
        let loglik = |w1: f64| -> f64 {
            obs.iter()
                .map(|&x| (w1 * models[0].pdf(x) + (1.0 - w1) * models[1].pdf(x)).ln())
                .sum()
        };
        let em_ll = loglik(w[0]);
        for k in 0..=100 {
            assert!(em_ll >= loglik(k as f64 / 100.0) - 1e-9);
        }
    }

    #[test]
    fn em_rejects_unexplained_observation() {
        let models = [Mixture::new(vec![Component::unif(0.0, 1.0, 1.0).unwrap()]).unwrap()];
        assert!(matches!(
            em_weights(&models, &[5.0], 10, 1e-8),
            Err(EnsembleError::ZeroDensityObservation(_))
        ));
    }

    #[test]
    fn em_loglik_monotone_over_iterations() {
        let models = [mdist1(), mdist2()];
        let obs = [1.0, 2.5, 3.0, 4.5];
        let loglik = |w: &[f64]| -> f64 {
            obs.iter()
                .map(|&x| (w[0] * models[0].pdf(x) + w[1] * models[1].pdf(x)).ln())
                .sum()
        };
        let mut prev = loglik(&[0.5, 0.5]);
        for it in 1..=25 {
            let w = em_weights(&models, &obs, it, 0.0).unwrap();
            let ll = loglik(&w);
            assert!(ll >= prev - 1e-10, "iteration {it}: {ll} < {prev}");
            prev = ll;
        }
    }

    #[test]
    fn crps_min_puts_weight_on_point_mass_at_truth() {
        let models = [
            Mixture::new(vec![Component::dirac(2.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::norm(10.0, 2.0, 1.0).unwrap()]).unwrap(),
        ];
        let fit = crps_min_weights(&models, &[2.0, 2.0, 2.0]).unwrap();
        assert!(fit.weights[0] > 1.0 - 1e-3, "weights = {:?}", fit.weights);
    }

    #[test]
    fn crps_min_identical_models_match_single_model_objective() {
        let models = [mdist1(), mdist1()];
        let obs = [2.0, 3.5];
        let fit = crps_min_weights(&models, &obs).unwrap();
        let single: f64 = obs
            .iter()
            .map(|&x| crps_mixture(&models[0], x).unwrap())
            .sum::<f64>()
            / obs.len() as f64;
        assert!((fit.objective - single).abs() < 1e-9);
    }

    #[test]
    fn crps_min_matches_grid_search() {
        let models = [
            Mixture::new(vec![Component::norm(0.0, 1.0, 1.0).unwrap()]).unwrap(),
            Mixture::new(vec![Component::norm(4.0, 1.5, 1.0).unwrap()]).unwrap(),
        ];
        let obs = [0.5, 1.5, 2.0, 3.0, 3.5];
        let fit = crps_min_weights(&models, &obs).unwrap();
        // grid-search oracle over w1
        let mut best = (0.0, f64::INFINITY);
        for k in 0..=100 {
            let w1 = k as f64 / 100.0;
            let w = [w1, 1.0 - w1];
            let obj = if w1 == 0.0 || w1 == 1.0 {
                let ens = if w1 == 1.0 { &models[0] } else { &models[1] };
                obs.iter()
                    .map(|&x| crps_mixture(ens, x).unwrap())
                    .sum::<f64>()
                    / obs.len() as f64
            } else {
                let ens = ma_ensemble(&models, &w).unwrap();
                obs.iter()
                    .map(|&x| crps_mixture(&ens, x).unwrap())
                    .sum::<f64>()
                    / obs.len() as f64
            };
            if obj < best.1 {
                best = (w1, obj);
            }
        }
        assert!(
            (fit.weights[0] - best.0).abs() <= 0.02,
            "fit w1 {} vs grid {}",
            fit.weights[0],
            best.0
        );
        assert!(fit.objective <= best.1 + 1e-9);
    }

    #[test]
    fn crps_min_never_beats_equal_weights_backwards() {
        let models = [mdist1(), mdist2()];
        let obs = [2.0, 3.0, 4.0];
        let fit = crps_min_weights(&models, &obs).unwrap();
        let eq = ma_ensemble(&models, &[0.5, 0.5]).unwrap();
        let eq_obj: f64 = obs
            .iter()
            .map(|&x| crps_mixture(&eq, x).unwrap())
            .sum::<f64>()
            / obs.len() as f64;
        assert!(fit.objective <= eq_obj + 1e-9);
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.5, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let p = project_simplex(&[2.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] == 0.0);
        let p = project_simplex(&[0.2, -0.1, 0.4]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}

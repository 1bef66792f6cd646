//! Bayesian treatment of the correlation parameters.
//!
//! The mean and process variance are integrated out analytically; the
//! correlation parameters `ψ = (θ, p)` are sampled by component-wise
//! random-walk Metropolis, and predictions are averaged over the draws with
//! the law of total variance.

use std::sync::Arc;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{
    factorize_matrix, integrated_log_likelihood, log_distances, ConditionalModel,
    CorrelationParams, KernelCache, Prediction, TrainingSet,
};
use crate::points::PointSet;
use crate::seed;

/// Independent priors: `log θ_j ~ U[lo, hi]` and `p_j ~ U[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPrior {
    log_theta_min: f64,
    log_theta_max: f64,
}

impl Default for PsiPrior {
    fn default() -> Self {
        PsiPrior {
            log_theta_min: 0.01f64.ln(),
            log_theta_max: 50f64.ln(),
        }
    }
}

impl PsiPrior {
    pub fn new(log_theta_min: f64, log_theta_max: f64) -> Result<Self> {
        if !(log_theta_min.is_finite() && log_theta_max.is_finite() && log_theta_min < log_theta_max)
        {
            return Err(Error::invalid(format!(
                "log-theta prior bounds [{log_theta_min}, {log_theta_max}] are not a finite interval"
            )));
        }
        Ok(PsiPrior {
            log_theta_min,
            log_theta_max,
        })
    }

    pub fn log_theta_bounds(&self) -> (f64, f64) {
        (self.log_theta_min, self.log_theta_max)
    }

    pub fn p_bounds(&self) -> (f64, f64) {
        (1.0, 2.0)
    }

    pub fn contains(&self, psi: &CorrelationParams) -> bool {
        psi.theta()
            .iter()
            .all(|t| (self.log_theta_min..=self.log_theta_max).contains(&t.ln()))
            && psi.power().iter().all(|p| (1.0..=2.0).contains(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub draws: usize,
    /// Initial proposal standard deviation in the sampler's coordinates
    /// (`log θ_j` and `logit(p_j - 1)`).
    pub step_size: f64,
    pub target_acceptance: f64,
    /// Starting point; defaults to `θ_j = 1, p_j = 1.5`.
    pub initial: Option<CorrelationParams>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 500,
            thin: 5,
            draws: 100,
            step_size: 0.5,
            target_acceptance: 0.30,
            initial: None,
        }
    }
}

/// How correlation parameters are obtained for a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum FitMethod {
    Mcmc(McmcConfig),
    /// Posterior mode from multi-start Nelder-Mead; a single draw.
    Map { starts: usize },
}

impl Default for FitMethod {
    fn default() -> Self {
        FitMethod::Mcmc(McmcConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiSample {
    pub draws: Vec<CorrelationParams>,
    pub acceptance_rate: f64,
    pub chain_seed: u64,
    pub warnings: Vec<String>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(s: f64) -> f64 {
    (s / (1.0 - s)).ln()
}

/// `log(σ(η)(1 - σ(η)))`: Jacobian of `p = 1 + σ(η)`.
fn log_sigmoid_jacobian(eta: f64) -> f64 {
    let a = eta.abs();
    -a - 2.0 * (-a).exp().ln_1p()
}

fn power_to_eta(p: f64) -> f64 {
    logit((p - 1.0).clamp(1e-9, 1.0 - 1e-9))
}

/// Log-likelihood evaluator over a [`KernelCache`]; constant outputs carry no
/// information about `ψ` and give a flat likelihood.
struct Likelihood<'a> {
    train: &'a TrainingSet,
    cache: Option<KernelCache>,
}

impl<'a> Likelihood<'a> {
    fn new(train: &'a TrainingSet, psi: &CorrelationParams) -> Self {
        let flat = train.output_range() == 0.0;
        Likelihood {
            train,
            cache: (!flat).then(|| KernelCache::new(train, psi)),
        }
    }

    fn current(&self) -> f64 {
        match &self.cache {
            None => 0.0,
            Some(cache) => match factorize_matrix(cache.matrix(), self.train) {
                Ok(fac) => integrated_log_likelihood(self.train, &fac),
                Err(_) => f64::NEG_INFINITY,
            },
        }
    }

    /// Evaluates with dimension `j` changed; returns the saved contribution
    /// so the caller can roll back.
    fn try_dim(&mut self, j: usize, theta: f64, p: f64) -> (f64, Option<Vec<f64>>) {
        let Some(cache) = self.cache.as_mut() else {
            return (0.0, None);
        };
        let saved = cache.dim_contrib(j).to_vec();
        cache.set_dim(j, theta, p);
        (self.current(), Some(saved))
    }

    fn rollback(&mut self, j: usize, saved: Option<Vec<f64>>) {
        if let (Some(cache), Some(saved)) = (self.cache.as_mut(), saved) {
            cache.restore_dim(j, saved);
        }
    }
}

/// Draws `ψ` from its posterior by component-wise random-walk Metropolis on
/// `(log θ_j, logit(p_j - 1))`. Proposal scales adapt during burn-in toward
/// the target acceptance rate and are frozen afterwards.
pub fn sample_psi(
    train: &TrainingSet,
    prior: &PsiPrior,
    cfg: &McmcConfig,
    chain_seed: u64,
) -> Result<PsiSample> {
    let d = train.dim();
    if cfg.draws == 0 || cfg.thin == 0 {
        return Err(Error::invalid("MCMC needs at least one draw and thin >= 1"));
    }
    if !(cfg.step_size >= 0.0 && cfg.step_size.is_finite()) {
        return Err(Error::invalid("MCMC step size must be a nonnegative number"));
    }
    let (lo, hi) = prior.log_theta_bounds();
    let start = match &cfg.initial {
        Some(psi) if psi.dim() == d => {
            if !prior.contains(psi) {
                return Err(Error::invalid("initial correlation parameters lie outside the prior"));
            }
            psi.clone()
        }
        Some(psi) => {
            return Err(Error::invalid(format!(
                "initial parameters have dimension {} but data has {d}",
                psi.dim()
            )))
        }
        None => CorrelationParams::uniform(d, 0.0f64.clamp(lo, hi).exp(), 1.5)?,
    };

    let mut rng = seed::rng(chain_seed);
    let mut theta = start.theta().to_vec();
    let mut power = start.power().to_vec();
    let mut log_theta: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let mut eta: Vec<f64> = power.iter().map(|&p| power_to_eta(p)).collect();

    let mut lik = Likelihood::new(train, &start);
    let mut loglik = lik.current();
    let mut steps = vec![cfg.step_size; 2 * d];
    let mut batch_accepts = vec![0usize; 2 * d];
    let mut batch_sweeps = 0usize;
    let mut batch_index = 0usize;
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut draws = Vec::with_capacity(cfg.draws);

    let total = cfg.burn_in + cfg.draws * cfg.thin;
    for sweep in 0..total {
        let burning = sweep < cfg.burn_in;
        for c in 0..2 * d {
            let j = c % d;
            let delta: f64 = steps[c] * rng.sample::<f64, _>(StandardNormal);
            let ok = if delta == 0.0 {
                true
            } else if c < d {
                let prop = log_theta[j] + delta;
                if prop < lo || prop > hi {
                    false
                } else {
                    let t = prop.exp();
                    let (ll, saved) = lik.try_dim(j, t, power[j]);
                    let log_ratio = ll - loglik;
                    if rng.random::<f64>().ln() < log_ratio {
                        log_theta[j] = prop;
                        theta[j] = t;
                        loglik = ll;
                        true
                    } else {
                        lik.rollback(j, saved);
                        false
                    }
                }
            } else {
                let prop = eta[j] + delta;
                let p = 1.0 + sigmoid(prop);
                if !(1.0..=2.0).contains(&p) {
                    false
                } else {
                    let (ll, saved) = lik.try_dim(j, theta[j], p);
                    let log_ratio = ll - loglik + log_sigmoid_jacobian(prop)
                        - log_sigmoid_jacobian(eta[j]);
                    if rng.random::<f64>().ln() < log_ratio {
                        eta[j] = prop;
                        power[j] = p;
                        loglik = ll;
                        true
                    } else {
                        lik.rollback(j, saved);
                        false
                    }
                }
            };
            if burning {
                batch_accepts[c] += usize::from(ok);
            } else {
                proposed += 1;
                accepted += usize::from(ok);
            }
        }
        if burning {
            batch_sweeps += 1;
            if batch_sweeps == 25 {
                batch_index += 1;
                let gain = 2.0 / (batch_index as f64).sqrt();
                for c in 0..2 * d {
                    let rate = batch_accepts[c] as f64 / batch_sweeps as f64;
                    steps[c] *= ((rate - cfg.target_acceptance) * gain).exp();
                    batch_accepts[c] = 0;
                }
                batch_sweeps = 0;
            }
        } else if (sweep - cfg.burn_in + 1) % cfg.thin == 0 {
            draws.push(CorrelationParams::new(theta.clone(), power.clone())?);
        }
    }

    let acceptance_rate = if proposed == 0 {
        1.0
    } else {
        accepted as f64 / proposed as f64
    };
    let mut warnings = Vec::new();
    if !(0.05..=0.95).contains(&acceptance_rate) {
        let msg = format!("MCMC acceptance rate {acceptance_rate:.3} is outside [0.05, 0.95]");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(PsiSample {
        draws,
        acceptance_rate,
        chain_seed,
        warnings,
    })
}

struct NegLogPosterior<'a> {
    train: &'a TrainingSet,
    prior: PsiPrior,
}

impl NegLogPosterior<'_> {
    fn params(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.train.dim();
        let (lo, hi) = self.prior.log_theta_bounds();
        let theta = u[..d]
            .iter()
            .map(|&v| (lo + (hi - lo) * sigmoid(v)).exp())
            .collect();
        let power = u[d..].iter().map(|&v| 1.0 + sigmoid(v)).collect();
        (theta, power)
    }
}

impl CostFunction for NegLogPosterior<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (theta, power) = self.params(u);
        let value = CorrelationParams::new(theta, power)
            .ok()
            .map(|psi| Likelihood::new(self.train, &psi).current())
            .filter(|ll| ll.is_finite())
            .map_or(1e300, |ll| -ll);
        Ok(value)
    }
}

/// Posterior mode of `ψ` (uniform priors, so the constrained likelihood
/// maximum) from `starts` Nelder-Mead runs; returned as a one-draw sample.
pub fn map_estimate(
    train: &TrainingSet,
    prior: &PsiPrior,
    starts: usize,
    seed_value: u64,
) -> Result<PsiSample> {
    let d = train.dim();
    let mut rng = seed::rng(seed_value);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut warnings = Vec::new();
    for _ in 0..starts.max(1) {
        let x0: Vec<f64> = (0..2 * d)
            .map(|_| logit(rng.random_range(0.05..0.95)))
            .collect();
        let mut simplex = vec![x0.clone()];
        for k in 0..2 * d {
            let mut v = x0.clone();
            v[k] += 1.0;
            simplex.push(v);
        }
        let problem = NegLogPosterior {
            train,
            prior: *prior,
        };
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-9)
            .map_err(|e| Error::invalid(e.to_string()))?;
        match Executor::new(problem, solver)
            .configure(|s| s.max_iters(400 * d as u64))
            .run()
        {
            Ok(res) => {
                let state = res.state();
                if let Some(p) = state.get_best_param() {
                    let cost = state.get_best_cost();
                    if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                        best = Some((cost, p.clone()));
                    }
                }
            }
            Err(e) => warnings.push(format!("MAP start failed: {e}")),
        }
    }
    let (_, u) = best.ok_or_else(|| Error::invalid("every MAP start failed"))?;
    let objective = NegLogPosterior {
        train,
        prior: *prior,
    };
    let (theta, power) = objective.params(&u);
    Ok(PsiSample {
        draws: vec![CorrelationParams::new(theta, power)?],
        acceptance_rate: 0.0,
        chain_seed: seed_value,
        warnings,
    })
}

pub fn fit_psi(
    train: &TrainingSet,
    prior: &PsiPrior,
    method: &FitMethod,
    chain_seed: u64,
) -> Result<PsiSample> {
    match method {
        FitMethod::Mcmc(cfg) => sample_psi(train, prior, cfg, chain_seed),
        FitMethod::Map { starts } => map_estimate(train, prior, *starts, chain_seed),
    }
}

/// Model-averaged predictive mean and variance over the `ψ` draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrediction {
    pub mean: f64,
    pub variance: f64,
    pub per_draw: Vec<(f64, f64)>,
}

impl MixturePrediction {
    pub fn as_prediction(&self, dof: usize) -> Prediction {
        Prediction {
            mean: self.mean,
            variance: self.variance,
            dof,
        }
    }
}

/// Average of the means, and average variance plus the `M - 1`-divisor
/// sample variance of the means.
fn mix(pairs: impl Iterator<Item = (f64, f64)> + Clone, m: usize) -> (f64, f64) {
    let mf = m as f64;
    let mean = pairs.clone().map(|p| p.0).sum::<f64>() / mf;
    let within = pairs.clone().map(|p| p.1).sum::<f64>() / mf;
    let between = if m > 1 {
        pairs.map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (mf - 1.0)
    } else {
        0.0
    };
    (mean, within + between)
}

pub fn mixture_predict(
    xstar: &[f64],
    train: &TrainingSet,
    psis: &PsiSample,
) -> Result<MixturePrediction> {
    let surrogate = Surrogate::new(Arc::new(train.clone()), psis.clone())?;
    Ok(surrogate.predict(xstar))
}

/// A fitted surrogate: one conditional model per posterior draw.
#[derive(Debug, Clone)]
pub struct Surrogate {
    train: Arc<TrainingSet>,
    models: Vec<ConditionalModel>,
    sample: PsiSample,
}

const BATCH_CHUNK: usize = 256;

impl Surrogate {
    pub fn new(train: Arc<TrainingSet>, sample: PsiSample) -> Result<Self> {
        if sample.draws.is_empty() {
            return Err(Error::invalid("posterior sample is empty"));
        }
        let models = sample
            .draws
            .iter()
            .map(|psi| ConditionalModel::fit(train.clone(), psi.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Surrogate {
            train,
            models,
            sample,
        })
    }

    pub fn train(&self) -> &TrainingSet {
        &self.train
    }

    pub fn sample(&self) -> &PsiSample {
        &self.sample
    }

    pub fn models(&self) -> &[ConditionalModel] {
        &self.models
    }

    pub fn dof(&self) -> usize {
        self.train.len() - 1
    }

    pub fn max_jitter(&self) -> f64 {
        self.models.iter().map(|m| m.jitter()).fold(0.0, f64::max)
    }

    pub fn predict(&self, x: &[f64]) -> MixturePrediction {
        let per_draw: Vec<(f64, f64)> = self
            .models
            .iter()
            .map(|m| {
                let p = m.predict(x);
                (p.mean, p.variance)
            })
            .collect();
        let (mean, variance) = mix(per_draw.iter().copied(), per_draw.len());
        MixturePrediction {
            mean,
            variance,
            per_draw,
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.models.iter().map(|m| m.mean(x)).sum::<f64>() / self.models.len() as f64
    }

    /// Mixture means for every row of `points`.
    pub fn mean_batch(&self, points: &PointSet) -> Vec<f64> {
        let m = self.models.len() as f64;
        self.batch(points, |model, r| model.mean_from_correlations(r))
            .into_iter()
            .map(|per| per.iter().sum::<f64>() / m)
            .collect()
    }

    /// Mixture predictions (mean and total variance) for every row.
    pub fn predict_batch(&self, points: &PointSet) -> Vec<Prediction> {
        let dof = self.dof();
        let m = self.models.len();
        self.batch(points, |model, r| {
            let mean = model.mean_from_correlations(r);
            (mean, model.variance_from_correlations(r))
        })
        .into_iter()
        .map(|per| {
            let (mean, variance) = mix(per.iter().copied(), m);
            Prediction {
                mean,
                variance,
                dof,
            }
        })
        .collect()
    }

    /// Evaluates `f` for every (row, draw) pair, sharing the log-distances of
    /// a row across draws.
    fn batch<T, F>(&self, points: &PointSet, f: F) -> Vec<Vec<T>>
    where
        T: Send,
        F: Fn(&ConditionalModel, &mut [f64]) -> T + Sync,
    {
        let n = self.train.len();
        (0..points.nrows())
            .into_par_iter()
            .with_min_len(BATCH_CHUNK)
            .map_init(
                || (Vec::with_capacity(n * points.dim()), Vec::with_capacity(n)),
                |(ld, r), i| {
                    log_distances(points.row(i), self.train.points(), ld);
                    self.models
                        .iter()
                        .map(|model| {
                            model.correlations_from_log_dist(ld, r);
                            f(model, r)
                        })
                        .collect()
                },
            )
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::conditional_predict;
    use crate::gp::factorize;

    fn toy_train() -> TrainingSet {
        let xs = [0.05, 0.2, 0.35, 0.5, 0.7, 0.85, 0.95];
        let pts = PointSet::from_rows(&xs.iter().map(|&x| vec![x, 1.0 - x * x]).collect::<Vec<_>>())
            .unwrap();
        let ys = xs.iter().map(|&x| (6.0 * x).sin() + x).collect();
        TrainingSet::new(pts, ys).unwrap()
    }

    #[test]
    fn degenerate_chain_returns_initial_point() {
        let train = toy_train();
        let init = CorrelationParams::new(vec![2.0, 0.3], vec![1.7, 1.2]).unwrap();
        let cfg = McmcConfig {
            burn_in: 0,
            thin: 1,
            draws: 1,
            step_size: 0.0,
            initial: Some(init.clone()),
            ..McmcConfig::default()
        };
        let sample = sample_psi(&train, &PsiPrior::default(), &cfg, 3).unwrap();
        assert_eq!(sample.draws, vec![init]);
    }

    #[test]
    fn chains_are_seed_deterministic_and_inside_the_prior() {
        let train = toy_train();
        let prior = PsiPrior::default();
        let cfg = McmcConfig {
            burn_in: 100,
            draws: 30,
            thin: 2,
            ..McmcConfig::default()
        };
        let a = sample_psi(&train, &prior, &cfg, 11).unwrap();
        let b = sample_psi(&train, &prior, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 30);
        assert!(a.draws.iter().all(|p| prior.contains(p)));
        let c = sample_psi(&train, &prior, &cfg, 12).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn single_draw_mixture_collapses_to_conditional() {
        let train = toy_train();
        let psi = CorrelationParams::new(vec![3.0, 1.0], vec![1.9, 1.4]).unwrap();
        let sample = PsiSample {
            draws: vec![psi.clone()],
            acceptance_rate: 1.0,
            chain_seed: 0,
            warnings: vec![],
        };
        let fac = factorize(&train, &psi).unwrap();
        let x = [0.6, 0.4];
        let cond = conditional_predict(&x, &train, &psi, &fac);
        let mix = mixture_predict(&x, &train, &sample).unwrap();
        assert!((mix.mean - cond.mean).abs() < 1e-14);
        assert!((mix.variance - cond.variance).abs() < 1e-14);

        let twice = PsiSample {
            draws: vec![psi.clone(), psi],
            ..sample
        };
        let mix2 = mixture_predict(&x, &train, &twice).unwrap();
        assert!((mix2.variance - cond.variance).abs() < 1e-14);
    }

    #[test]
    fn law_of_total_variance_with_two_draws() {
        let (m, v) = mix([(0.0, 1.0), (2.0, 1.0)].into_iter(), 2);
        assert_eq!(m, 1.0);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn batch_paths_match_pointwise_prediction() {
        let train = Arc::new(toy_train());
        let sample = sample_psi(
            &train,
            &PsiPrior::default(),
            &McmcConfig {
                burn_in: 50,
                draws: 5,
                thin: 3,
                ..McmcConfig::default()
            },
            5,
        )
        .unwrap();
        let s = Surrogate::new(train.clone(), sample).unwrap();
        let pts = PointSet::from_rows(&[vec![0.1, 0.9], vec![0.55, 0.2], vec![0.35, 1.0 - 0.35 * 0.35]])
            .unwrap();
        let means = s.mean_batch(&pts);
        let preds = s.predict_batch(&pts);
        for (i, row) in pts.rows().enumerate() {
            let p = s.predict(row);
            assert!((means[i] - p.mean).abs() < 1e-12);
            assert!((preds[i].mean - p.mean).abs() < 1e-12);
            assert!((preds[i].variance - p.variance).abs() < 1e-12 * (1.0 + p.variance));
            assert!((s.mean(row) - p.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn map_estimate_improves_on_its_starts() {
        let train = toy_train();
        let prior = PsiPrior::default();
        let fit = map_estimate(&train, &prior, 4, 9).unwrap();
        assert_eq!(fit.draws.len(), 1);
        let psi = &fit.draws[0];
        assert!(prior.contains(psi));
        let ll = integrated_log_likelihood(&train, &factorize(&train, psi).unwrap());
        let base = CorrelationParams::uniform(2, 1.0, 1.5).unwrap();
        let ll0 = integrated_log_likelihood(&train, &factorize(&train, &base).unwrap());
        assert!(ll >= ll0);
    }

    #[test]
    fn prior_rejects_bad_bounds() {
        assert!(PsiPrior::new(1.0, 1.0).is_err());
        assert!(PsiPrior::new(f64::NEG_INFINITY, 1.0).is_err());
    }
}

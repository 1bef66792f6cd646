//! Distributions of the random simulator inputs.
//!
//! Inputs are independent. Each marginal is parametric, empirical, or a
//! two-stratum mixture `H = p1·G1 + p2·G2` that deliberately over-samples one
//! tail; the natural (population) probability of the first stratum is kept
//! alongside so estimates can be re-weighted.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::designs::Transform;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::seed::{self, SimRng};

/// Values sampled uniformly with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    sorted: Vec<f64>,
}

impl Empirical {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empirical distribution needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("empirical data must be finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Empirical { sorted: values })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of values `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        self.sorted[rng.random_range(0..self.sorted.len())]
    }
}

/// Mixture of a lower and an upper stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStratum {
    pub lower: Marginal,
    pub upper: Marginal,
    /// Sampling probability of the lower stratum.
    pub p1: f64,
    /// Population probability of the lower stratum, used for stratum weights.
    pub natural_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    /// Parameters of the underlying normal on the log scale.
    LogNormal { log_mean: f64, log_sd: f64 },
    Uniform { lower: f64, upper: f64 },
    Weibull { shape: f64, scale: f64, location: f64 },
    Empirical(Empirical),
    TwoStratum(Box<TwoStratum>),
}

impl Marginal {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let m = Marginal::Normal { mean, sd };
        m.validate()?;
        Ok(m)
    }

    pub fn lognormal(log_mean: f64, log_sd: f64) -> Result<Self> {
        let m = Marginal::LogNormal { log_mean, log_sd };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let m = Marginal::Uniform { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn weibull(shape: f64, scale: f64, location: f64) -> Result<Self> {
        let m = Marginal::Weibull {
            shape,
            scale,
            location,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Ok(Marginal::Empirical(Empirical::new(values)?))
    }

    pub fn two_stratum(lower: Marginal, upper: Marginal, p1: f64, natural_p: f64) -> Result<Self> {
        let m = Marginal::TwoStratum(Box::new(TwoStratum {
            lower,
            upper,
            p1,
            natural_p,
        }));
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match self {
            Marginal::Normal { mean, sd } => {
                if !(finite(*mean) && finite(*sd) && *sd > 0.0) {
                    return Err(Error::invalid(format!("normal({mean}, {sd}) needs sd > 0")));
                }
            }
            Marginal::LogNormal { log_mean, log_sd } => {
                if !(finite(*log_mean) && finite(*log_sd) && *log_sd > 0.0) {
                    return Err(Error::invalid(format!(
                        "lognormal({log_mean}, {log_sd}) needs log_sd > 0"
                    )));
                }
            }
            Marginal::Uniform { lower, upper } => {
                if !(finite(*lower) && finite(*upper) && lower < upper) {
                    return Err(Error::invalid(format!("uniform({lower}, {upper}) is empty")));
                }
            }
            Marginal::Weibull {
                shape,
                scale,
                location,
            } => {
                if !(finite(*shape) && finite(*scale) && finite(*location))
                    || *shape <= 0.0
                    || *scale <= 0.0
                {
                    return Err(Error::invalid("weibull needs positive shape and scale"));
                }
            }
            Marginal::Empirical(e) => {
                if e.sorted.is_empty() {
                    return Err(Error::invalid("empty empirical distribution"));
                }
            }
            Marginal::TwoStratum(m) => {
                for (name, p) in [("p1", m.p1), ("natural_p", m.natural_p)] {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::invalid(format!("{name} = {p} must lie in (0, 1)")));
                    }
                }
                if matches!(m.lower, Marginal::TwoStratum(_))
                    || matches!(m.upper, Marginal::TwoStratum(_))
                {
                    return Err(Error::invalid("mixture strata cannot themselves be mixtures"));
                }
                m.lower.validate()?;
                m.upper.validate()?;
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Marginal::Normal { mean, sd } => Normal::new(*mean, *sd)
                .expect("validated normal")
                .sample(rng),
            Marginal::LogNormal { log_mean, log_sd } => LogNormal::new(*log_mean, *log_sd)
                .expect("validated lognormal")
                .sample(rng),
            Marginal::Uniform { lower, upper } => rng.random_range(*lower..*upper),
            Marginal::Weibull {
                shape,
                scale,
                location,
            } => {
                let u = 1.0 - rng.random::<f64>();
                location + scale * (-u.ln()).powf(1.0 / shape)
            }
            Marginal::Empirical(e) => e.sample(rng),
            Marginal::TwoStratum(m) => {
                if rng.random::<f64>() < m.p1 {
                    m.lower.sample(rng)
                } else {
                    m.upper.sample(rng)
                }
            }
        }
    }

    /// Samples from one stratum of a mixture; `None` for other kinds.
    pub fn sample_stratum(&self, stratum: Stratum, rng: &mut SimRng) -> Option<f64> {
        match self {
            Marginal::TwoStratum(m) => Some(match stratum {
                Stratum::Lower => m.lower.sample(rng),
                Stratum::Upper => m.upper.sample(rng),
            }),
            _ => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Marginal::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - log_mean) / log_sd)
                }
            }
            Marginal::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Marginal::Weibull {
                shape,
                scale,
                location,
            } => {
                if x <= *location {
                    0.0
                } else {
                    -(-((x - location) / scale).powf(*shape)).exp_m1()
                }
            }
            Marginal::Empirical(e) => e.cdf(x),
            Marginal::TwoStratum(m) => m.p1 * m.lower.cdf(x) + (1.0 - m.p1) * m.upper.cdf(x),
        }
    }

    /// Box used for uniform designs and input scaling: mean ± 3 sd (on the
    /// log scale for lognormals), or the data range for empirical marginals.
    /// Bounds are in the coordinates named by the returned transform.
    pub fn design_interval(&self) -> (f64, f64, Transform) {
        match self {
            Marginal::Normal { mean, sd } => (mean - 3.0 * sd, mean + 3.0 * sd, Transform::Identity),
            Marginal::LogNormal { log_mean, log_sd } => (
                log_mean - 3.0 * log_sd,
                log_mean + 3.0 * log_sd,
                Transform::Exponential,
            ),
            Marginal::Uniform { lower, upper } => (*lower, *upper, Transform::Identity),
            Marginal::Weibull {
                shape,
                scale,
                location,
            } => {
                let g1 = statrs::function::gamma::gamma(1.0 + 1.0 / shape);
                let g2 = statrs::function::gamma::gamma(1.0 + 2.0 / shape);
                let mean = location + scale * g1;
                let sd = scale * (g2 - g1 * g1).max(0.0).sqrt();
                ((mean - 3.0 * sd).max(*location), mean + 3.0 * sd, Transform::Identity)
            }
            Marginal::Empirical(e) => {
                let (lo, hi) = (e.sorted[0], e.sorted[e.sorted.len() - 1]);
                if lo < hi {
                    (lo, hi, Transform::Identity)
                } else {
                    (lo - 0.5, hi + 0.5, Transform::Identity)
                }
            }
            Marginal::TwoStratum(m) => {
                let (a, b, _) = m.lower.design_interval();
                let (c, d, _) = m.upper.design_interval();
                (a.min(c), b.max(d), Transform::Identity)
            }
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Independent marginals, one per simulator input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputModel {
    marginals: Vec<Marginal>,
    names: Vec<String>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        let names = (1..=marginals.len()).map(|j| format!("x_{j}")).collect();
        Self::with_names(marginals, names)
    }

    pub fn with_names(marginals: Vec<Marginal>, names: Vec<String>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("an input model needs at least one marginal"));
        }
        if names.len() != marginals.len() {
            return Err(Error::invalid("one name per marginal is required"));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(InputModel { marginals, names })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_stratified(&self) -> bool {
        self.marginals
            .iter()
            .all(|m| matches!(m, Marginal::TwoStratum(_)))
    }
}

/// `n` i.i.d. rows from the product of the marginals.
pub fn sample(model: &InputModel, n: usize, seed_value: u64) -> PointSet {
    let mut rng = seed::rng(seed_value);
    let d = model.dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for m in &model.marginals {
            data.push(m.sample(&mut rng));
        }
    }
    PointSet::from_flat(d, data).expect("dimension matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeibullParams {
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoredWeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub location: f64,
    pub cutoff_value: f64,
    pub n_complete: usize,
    pub n_censored: usize,
    pub log_likelihood: f64,
    /// Log-likelihood at each multi-start initial point.
    pub start_log_likelihoods: Vec<f64>,
}

impl CensoredWeibullFit {
    pub fn marginal(&self) -> Result<Marginal> {
        Marginal::weibull(self.shape, self.scale, self.location)
    }
}

/// `Σ log f(x_i) + n_censored · log S(cutoff)` for a shifted Weibull.
pub fn censored_weibull_log_likelihood(
    complete: &[f64],
    n_censored: usize,
    cutoff: f64,
    shape: f64,
    scale: f64,
    location: f64,
) -> f64 {
    if !(shape > 0.0 && scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut ll = 0.0;
    for &x in complete {
        let z = (x - location) / scale;
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += shape.ln() - scale.ln() + (shape - 1.0) * z.ln() - z.powf(shape);
    }
    if n_censored > 0 {
        let z = ((cutoff - location) / scale).max(0.0);
        ll -= n_censored as f64 * z.powf(shape);
    }
    ll
}

struct CensoredObjective<'a> {
    complete: &'a [f64],
    n_censored: usize,
    cutoff: f64,
    x_min: f64,
    params: WeibullParams,
}

impl CensoredObjective<'_> {
    /// Unconstrained coordinates: `(log shape, log scale[, log(x_min - location)])`.
    fn decode(&self, v: &[f64]) -> (f64, f64, f64) {
        let location = match self.params {
            WeibullParams::Two => 0.0,
            WeibullParams::Three => self.x_min - v[2].exp(),
        };
        (v[0].exp(), v[1].exp(), location)
    }

    fn log_likelihood(&self, v: &[f64]) -> f64 {
        let (shape, scale, location) = self.decode(v);
        censored_weibull_log_likelihood(
            self.complete,
            self.n_censored,
            self.cutoff,
            shape,
            scale,
            location,
        )
    }
}

impl CostFunction for CensoredObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let ll = self.log_likelihood(v);
        Ok(if ll.is_finite() { -ll } else { 1e300 })
    }
}

impl Gradient for CensoredObjective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, v: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let mut g = vec![0.0; v.len()];
        let mut w = v.clone();
        for i in 0..v.len() {
            let h = 1e-6 * v[i].abs().max(1.0);
            w[i] = v[i] + h;
            let up = self.cost(&w)?;
            w[i] = v[i] - h;
            let down = self.cost(&w)?;
            w[i] = v[i];
            g[i] = (up - down) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Maximum-likelihood Weibull fit to the lowest `lower_fraction` of `data`,
/// treating the rest as right-censored at the largest complete value.
pub fn fit_censored_weibull(
    data: &[f64],
    lower_fraction: f64,
    params: WeibullParams,
) -> Result<CensoredWeibullFit> {
    if !(lower_fraction > 0.0 && lower_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "lower fraction {lower_fraction} must lie in (0, 1]"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Weibull data must be finite"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((lower_fraction * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    if k < 10 {
        return Err(Error::invalid(format!(
            "only {k} complete observations below the cutoff; at least 10 are needed"
        )));
    }
    let complete = &sorted[..k];
    let cutoff = complete[k - 1];
    let x_min = complete[0];
    if params == WeibullParams::Two && x_min <= 0.0 {
        return Err(Error::invalid("2-parameter Weibull data must be positive"));
    }
    let objective = CensoredObjective {
        complete,
        n_censored: n - k,
        cutoff,
        x_min,
        params,
    };
    if x_min == cutoff {
        return Err(Error::FitFailure {
            message: "degenerate likelihood: all complete observations are identical".into(),
            shape: f64::NAN,
            scale: f64::NAN,
            location: f64::NAN,
        });
    }

    // Starting points span light to heavy tails; the scale is chosen so the
    // fitted CDF at the cutoff matches the empirical fraction.
    let q = (k as f64 / (n as f64 + 1.0)).min(0.999);
    let spread = cutoff - x_min;
    let mut starts = Vec::new();
    for shape in [0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0] {
        let (loc, gap) = match params {
            WeibullParams::Two => (0.0, None),
            WeibullParams::Three => {
                let gap = (0.5 * x_min.abs()).max(spread);
                (x_min - gap, Some(gap))
            }
        };
        let scale = (cutoff - loc) / (-(1.0 - q).ln()).powf(1.0 / shape);
        let mut v = vec![shape.ln(), scale.ln()];
        if let Some(gap) = gap {
            v.push(gap.ln());
        }
        starts.push(v);
    }

    let mut start_lls = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for v0 in starts {
        let ll0 = objective.log_likelihood(&v0);
        start_lls.push(ll0);
        if ll0.is_finite() && best.as_ref().is_none_or(|(b, _)| ll0 > *b) {
            best = Some((ll0, v0.clone()));
        }
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
            .with_tolerance_cost(1e-12)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let problem = CensoredObjective { ..objective };
        if let Ok(res) = Executor::new(problem, solver)
            .configure(|s| s.param(v0).max_iters(500))
            .run()
        {
            if let Some(v) = res.state().get_best_param() {
                let ll = objective.log_likelihood(v);
                if ll.is_finite() && best.as_ref().is_none_or(|(b, _)| ll > *b) {
                    best = Some((ll, v.clone()));
                }
            }
        }
    }

    let Some((ll, v)) = best else {
        return Err(Error::FitFailure {
            message: "no start produced a finite likelihood".into(),
            shape: f64::NAN,
            scale: f64::NAN,
            location: f64::NAN,
        });
    };
    let (shape, scale, location) = objective.decode(&v);
    if !(shape.is_finite() && scale.is_finite() && location.is_finite()) || shape > 1e3 {
        return Err(Error::FitFailure {
            message: "optimizer ran to the boundary of the parameter space".into(),
            shape,
            scale,
            location,
        });
    }
    Ok(CensoredWeibullFit {
        shape,
        scale,
        location,
        cutoff_value: cutoff,
        n_complete: k,
        n_censored: n - k,
        log_likelihood: ll,
        start_log_likelihoods: start_lls,
    })
}

/// Empirical mixture of the lowest `split_fraction` of the data (first
/// stratum) and the remainder, sampled with probabilities `(p1, 1 - p1)`.
pub fn build_tail_mixture(data: &[f64], split_fraction: f64, p1: f64) -> Result<Marginal> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction {split_fraction} must lie in (0, 1)"
        )));
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::invalid(format!("p1 = {p1} must lie in (0, 1)")));
    }
    let mut sorted = data.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mixture data must be finite"));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = (split_fraction * n as f64).round() as usize;
    if k < 1 || n - k < 1 {
        return Err(Error::invalid(format!(
            "splitting {n} points at fraction {split_fraction} leaves an empty stratum"
        )));
    }
    let upper = sorted.split_off(k);
    Marginal::two_stratum(
        Marginal::empirical(sorted)?,
        Marginal::empirical(upper)?,
        p1,
        k as f64 / n as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, s)
    }

    #[test]
    fn standard_normal_sample_moments() {
        let model = InputModel::new(vec![Marginal::normal(0.0, 1.0).unwrap()]).unwrap();
        let s = sample(&model, 100_000, 42);
        let (m, sd) = mean_sd(&s.column(0));
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
    }

    #[test]
    fn degenerate_empirical_and_lognormal_positivity() {
        let model = InputModel::new(vec![
            Marginal::empirical(vec![1.0]).unwrap(),
            Marginal::lognormal(0.0, 3.0).unwrap(),
        ])
        .unwrap();
        let s = sample(&model, 5000, 1);
        assert!(s.column(0).iter().all(|&v| v == 1.0));
        assert!(s.column(1).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn mixture_stratum_frequency() {
        let m = Marginal::two_stratum(
            Marginal::uniform(0.0, 1.0).unwrap(),
            Marginal::uniform(2.0, 3.0).unwrap(),
            0.5,
            0.1,
        )
        .unwrap();
        let model = InputModel::new(vec![m]).unwrap();
        let s = sample(&model, 100_000, 7);
        let frac = s.column(0).iter().filter(|&&v| v < 1.5).count() as f64 / 1e5;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let model = InputModel::new(vec![
            Marginal::normal(2.0, 0.1).unwrap(),
            Marginal::weibull(2.0, 1.0, 0.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(sample(&model, 50, 9), sample(&model, 50, 9));
        assert_ne!(sample(&model, 50, 9), sample(&model, 50, 10));
    }

    #[test]
    fn tail_mixture_deciles() {
        let data: Vec<f64> = (1..=10).map(f64::from).collect();
        let m = build_tail_mixture(&data, 0.1, 0.5).unwrap();
        let Marginal::TwoStratum(mix) = &m else {
            panic!("expected a mixture")
        };
        assert_eq!(mix.lower, Marginal::empirical(vec![1.0]).unwrap());
        assert_eq!(
            mix.upper,
            Marginal::empirical((2..=10).map(f64::from).collect()).unwrap()
        );
        assert_eq!(mix.natural_p, 0.1);
        assert_eq!(mix.p1, 0.5);
    }

    #[test]
    fn proportionate_mixture_matches_full_empirical() {
        let data: Vec<f64> = (1..=10).map(f64::from).collect();
        let mix = build_tail_mixture(&data, 0.1, 0.1).unwrap();
        let full = Marginal::empirical(data.clone()).unwrap();
        for x in [0.0, 1.0, 1.5, 2.0, 5.5, 9.99, 10.0, 11.0] {
            assert!((mix.cdf(x) - full.cdf(x)).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn mixture_cdf_identity() {
        let data: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
        let m = build_tail_mixture(&data, 0.2, 0.6).unwrap();
        let Marginal::TwoStratum(mix) = &m else {
            unreachable!()
        };
        for x in data.iter().copied().chain([-10.0, 10.0]) {
            let expect = 0.6 * mix.lower.cdf(x) + 0.4 * mix.upper.cdf(x);
            assert_eq!(m.cdf(x), expect);
        }
    }

    #[test]
    fn tail_mixture_rejects_bad_arguments() {
        let data: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!(build_tail_mixture(&data, 0.0, 0.5).is_err());
        assert!(build_tail_mixture(&data, 0.5, 1.0).is_err());
        assert!(build_tail_mixture(&data, 0.01, 0.5).is_err());
        assert!(build_tail_mixture(&[1.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn invalid_marginals_are_rejected() {
        assert!(Marginal::normal(0.0, 0.0).is_err());
        assert!(Marginal::lognormal(0.0, -1.0).is_err());
        assert!(Marginal::empirical(vec![]).is_err());
        assert!(Marginal::empirical(vec![f64::NAN]).is_err());
        let e = Marginal::empirical(vec![1.0]).unwrap();
        assert!(Marginal::two_stratum(e.clone(), e, 1.0, 0.5).is_err());
        assert!(InputModel::new(vec![]).is_err());
    }

    #[test]
    fn identical_complete_observations_fail() {
        let mut data = vec![1.0; 12];
        data.extend((0..100).map(|i| 2.0 + i as f64));
        let err = fit_censored_weibull(&data, 0.1, WeibullParams::Two).unwrap_err();
        assert!(matches!(err, Error::FitFailure { .. }));
    }

    #[test]
    fn too_few_complete_points() {
        let data: Vec<f64> = (1..=50).map(f64::from).collect();
        assert!(fit_censored_weibull(&data, 0.1, WeibullParams::Two).is_err());
    }
}

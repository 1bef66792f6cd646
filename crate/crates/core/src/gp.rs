//! Gaussian-process machinery for fixed correlation parameters.
//!
//! The model is a constant mean plus a stationary process with the
//! power-exponential correlation `exp(-Σ θ_j |x_j - x'_j|^{p_j})`. With a flat
//! prior on the mean and a Jeffreys prior on the process variance, the
//! predictive distribution at an untried point is a shifted and scaled
//! Student-t with `n - 1` degrees of freedom; [`ConditionalModel`] evaluates
//! its location and scale.
//!
//! All coordinates here are the model's internal `[0, 1]`-scaled inputs.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::points::{max_abs_distance, PointSet};

/// Two training points closer than this (max-abs, scaled) count as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Nuggets tried in order until the Cholesky factorization succeeds.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Evaluated design points and their simulator outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: PointSet,
    outputs: Vec<f64>,
}

impl TrainingSet {
    pub fn new(points: PointSet, outputs: Vec<f64>) -> Result<Self> {
        if points.nrows() != outputs.len() {
            return Err(Error::invalid(format!(
                "{} points but {} outputs",
                points.nrows(),
                outputs.len()
            )));
        }
        if outputs.len() < 2 {
            return Err(Error::invalid("a training set needs at least 2 points"));
        }
        if let Some(i) = outputs.iter().position(|y| !y.is_finite()) {
            return Err(Error::invalid(format!("output #{i} is not finite")));
        }
        if points.as_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training points contain non-finite coordinates"));
        }
        for i in 1..points.nrows() {
            for k in 0..i {
                if max_abs_distance(points.row(i), points.row(k)) <= DUPLICATE_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "training points #{k} and #{i} coincide"
                    )));
                }
            }
        }
        Ok(TrainingSet { points, outputs })
    }

    /// Appends one evaluation, enforcing the same invariants as [`TrainingSet::new`].
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cannot append a non-finite evaluation"));
        }
        if self.contains_near(x, DUPLICATE_TOLERANCE) {
            return Err(Error::invalid("point duplicates an existing training point"));
        }
        self.points.push(x)?;
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn contains_near(&self, x: &[f64], tol: f64) -> bool {
        self.points.rows().any(|p| max_abs_distance(p, x) <= tol)
    }

    pub fn output_range(&self) -> f64 {
        let (lo, hi) = self
            .outputs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
        hi - lo
    }

    /// Indices and Euclidean distance of the closest pair of points.
    pub fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 1, f64::INFINITY);
        for i in 1..self.len() {
            for k in 0..i {
                let d2: f64 = self
                    .points
                    .row(i)
                    .iter()
                    .zip(self.points.row(k))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 < best.2 {
                    best = (k, i, d2);
                }
            }
        }
        (best.0, best.1, best.2.sqrt())
    }
}

/// Range (`theta`) and smoothness (`power`) of the power-exponential kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParams {
    theta: Vec<f64>,
    power: Vec<f64>,
}

impl CorrelationParams {
    pub fn new(theta: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.len() != power.len() {
            return Err(Error::invalid(format!(
                "theta has {} entries and power has {}",
                theta.len(),
                power.len()
            )));
        }
        if let Some(t) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::invalid(format!("theta must be positive, got {t}")));
        }
        if let Some(p) = power.iter().find(|p| !(1.0..=2.0).contains(*p)) {
            return Err(Error::invalid(format!("power must lie in [1, 2], got {p}")));
        }
        Ok(CorrelationParams { theta, power })
    }

    pub fn uniform(dim: usize, theta: f64, power: f64) -> Result<Self> {
        Self::new(vec![theta; dim], vec![power; dim])
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }
}

#[inline]
fn abs_pow(delta: f64, p: f64) -> f64 {
    let a = delta.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

/// Power-exponential correlation for raw parameter slices. `theta` may be zero
/// here (the constant-kernel limit); [`CorrelationParams`] forbids that.
pub fn correlation_with(x: &[f64], x2: &[f64], theta: &[f64], power: &[f64]) -> Result<f64> {
    if x.len() != x2.len() || x.len() != theta.len() || theta.len() != power.len() {
        return Err(Error::invalid("dimension mismatch in correlation"));
    }
    if x.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation of a non-finite point"));
    }
    Ok(kernel(x, x2, theta, power))
}

pub fn correlation(x: &[f64], x2: &[f64], psi: &CorrelationParams) -> Result<f64> {
    correlation_with(x, x2, &psi.theta, &psi.power)
}

#[inline]
fn kernel(x: &[f64], x2: &[f64], theta: &[f64], power: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..x.len() {
        s += theta[j] * abs_pow(x[j] - x2[j], power[j]);
    }
    (-s).exp()
}

/// Correlation matrix of the training points and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct KernelFactorization {
    corr: DMatrix<f64>,
    chol: DMatrix<f64>,
    jitter: f64,
}

impl KernelFactorization {
    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Lower-triangular `L` with `L Lᵀ = R + jitter·I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n(&self) -> usize {
        self.corr.nrows()
    }

    /// Solves `L z = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * b[k];
            }
            b[i] = s / self.chol[(i, i)];
        }
    }

    /// Solves `Lᵀ z = b` in place.
    pub fn backward_solve(&self, b: &mut [f64]) {
        let n = self.n();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.chol[(k, i)] * b[k];
            }
            b[i] = s / self.chol[(i, i)];
        }
    }

    /// `(R + jitter·I)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = b.to_vec();
        self.forward_solve(&mut z);
        self.backward_solve(&mut z);
        z
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n()).map(|i| self.chol[(i, i)].ln()).sum::<f64>()
    }
}

fn cholesky_lower(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let l = Cholesky::new(m)?.unpack();
    // Pivots below roundoff level mean the factor is numerically meaningless.
    let floor = n as f64 * f64::EPSILON;
    (0..n)
        .all(|i| {
            let d = l[(i, i)];
            d.is_finite() && d * d > floor
        })
        .then_some(l)
}

/// Factorizes a correlation matrix, escalating the nugget along
/// [`JITTER_LADDER`] until the factor is usable.
pub(crate) fn factorize_matrix(corr: DMatrix<f64>, train: &TrainingSet) -> Result<KernelFactorization> {
    for &jitter in &JITTER_LADDER {
        let mut m = corr.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = cholesky_lower(m) {
            if jitter > 0.0 {
                log::debug!("kernel factorization needed jitter {jitter:e}");
            }
            return Ok(KernelFactorization { corr, chol, jitter });
        }
    }
    let (a, b, distance) = train.closest_pair();
    Err(Error::IllConditioned {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        closest: (a, b),
        distance,
    })
}

pub fn correlation_matrix(points: &PointSet, psi: &CorrelationParams) -> DMatrix<f64> {
    let n = points.nrows();
    let mut corr = DMatrix::identity(n, n);
    for i in 1..n {
        for k in 0..i {
            let c = kernel(points.row(i), points.row(k), &psi.theta, &psi.power);
            corr[(i, k)] = c;
            corr[(k, i)] = c;
        }
    }
    corr
}

pub fn factorize(train: &TrainingSet, psi: &CorrelationParams) -> Result<KernelFactorization> {
    if psi.dim() != train.dim() {
        return Err(Error::invalid(format!(
            "correlation parameters have dimension {} but points have {}",
            psi.dim(),
            train.dim()
        )));
    }
    factorize_matrix(correlation_matrix(train.points(), psi), train)
}

/// Generalized-least-squares estimate of the constant mean, `1ᵀR⁻¹y / 1ᵀR⁻¹1`.
pub fn profile_mean(train: &TrainingSet, fac: &KernelFactorization) -> f64 {
    let mut w = vec![1.0; train.len()];
    let mut z = train.outputs().to_vec();
    fac.forward_solve(&mut w);
    fac.forward_solve(&mut z);
    dot(&w, &z) / dot(&w, &w)
}

/// `(y - 1μ)ᵀ R⁻¹ (y - 1μ) / (n - 1)`.
pub fn profile_variance(train: &TrainingSet, fac: &KernelFactorization, mu: f64) -> f64 {
    let mut r: Vec<f64> = train.outputs().iter().map(|y| y - mu).collect();
    fac.forward_solve(&mut r);
    (dot(&r, &r) / (train.len() - 1) as f64).max(0.0)
}

/// Location, scale and degrees of freedom of the predictive t distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub dof: usize,
}

pub fn conditional_predict(
    xstar: &[f64],
    train: &TrainingSet,
    psi: &CorrelationParams,
    fac: &KernelFactorization,
) -> Prediction {
    let model = ConditionalModel::from_factorization(Arc::new(train.clone()), psi.clone(), fac);
    model.predict(xstar)
}

/// Log of the likelihood of `ψ` with the mean and process variance
/// integrated out (flat and Jeffreys priors), up to an additive constant:
/// `-½ log|R| - ½ log(1ᵀR⁻¹1) - (n-1)/2 · log σ̂²`.
pub fn integrated_log_likelihood(train: &TrainingSet, fac: &KernelFactorization) -> f64 {
    let n = train.len();
    let mut w = vec![1.0; n];
    let mut z = train.outputs().to_vec();
    fac.forward_solve(&mut w);
    fac.forward_solve(&mut z);
    let one_r_one = dot(&w, &w);
    let mu = dot(&w, &z) / one_r_one;
    let rss: f64 = z.iter().zip(&w).map(|(zi, wi)| (zi - mu * wi).powi(2)).sum();
    let sigma2 = rss / (n - 1) as f64;
    let ll = -0.5 * fac.log_det() - 0.5 * one_r_one.ln() - 0.5 * (n - 1) as f64 * sigma2.ln();
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// `exp(x)` without branches, so loops over it vectorize. Range reduction
/// `x = k ln 2 + r` with `|r| <= ln 2 / 2` and a degree-13 Taylor polynomial
/// give a relative error of a few ulp. Arguments are clamped to
/// `[-708, 709]`, so results below `exp(-708)` are returned as that value
/// instead of underflowing to zero; correlations that small are
/// indistinguishable from zero in every use here.
#[inline(always)]
pub(crate) fn exp_unrolled(x: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 2^52 + 2^51
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.max(-708.0).min(709.0);
    let t = x * std::f64::consts::LOG2_E + MAGIC;
    let k = t - MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let k_bits = t.to_bits().wrapping_sub(MAGIC.to_bits());
    p * f64::from_bits(k_bits.wrapping_add(1023) << 52)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Natural logs of `|x_j - t_kj|` laid out dimension-major (`j * n + k`), so
/// one query point can be predicted under many parameter draws without
/// recomputing logarithms.
pub fn log_distances(x: &[f64], points: &PointSet, out: &mut Vec<f64>) {
    let n = points.nrows();
    let d = points.dim();
    out.clear();
    out.resize(n * d, 0.0);
    for (k, t) in points.rows().enumerate() {
        for j in 0..d {
            out[j * n + k] = (x[j] - t[j]).abs().ln();
        }
    }
}

/// Everything needed to predict at new points for one fixed `ψ`.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    train: Arc<TrainingSet>,
    psi: CorrelationParams,
    /// Row-major copy of the Cholesky factor for fast forward solves.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    w_one: Vec<f64>,
    one_r_one: f64,
    mu: f64,
    sigma2: f64,
    jitter: f64,
}

impl ConditionalModel {
    pub fn fit(train: Arc<TrainingSet>, psi: CorrelationParams) -> Result<Self> {
        let fac = factorize(&train, &psi)?;
        Ok(Self::from_factorization(train, psi, &fac))
    }

    pub fn from_factorization(
        train: Arc<TrainingSet>,
        psi: CorrelationParams,
        fac: &KernelFactorization,
    ) -> Self {
        let n = train.len();
        let mu = profile_mean(&train, fac);
        let sigma2 = profile_variance(&train, fac, mu);
        let resid: Vec<f64> = train.outputs().iter().map(|y| y - mu).collect();
        let alpha = fac.solve(&resid);
        let mut w_one = vec![1.0; n];
        fac.forward_solve(&mut w_one);
        let one_r_one = dot(&w_one, &w_one);
        let mut chol = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..=i {
                chol[i * n + k] = fac.chol[(i, k)];
            }
        }
        ConditionalModel {
            train,
            psi,
            chol,
            alpha,
            w_one,
            one_r_one,
            mu,
            sigma2,
            jitter: fac.jitter,
        }
    }

    pub fn psi(&self) -> &CorrelationParams {
        &self.psi
    }

    pub fn train(&self) -> &TrainingSet {
        &self.train
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn correlations(&self, x: &[f64], r: &mut Vec<f64>) {
        r.clear();
        r.extend(
            self.train
                .points()
                .rows()
                .map(|t| kernel(x, t, &self.psi.theta, &self.psi.power)),
        );
    }

    /// Correlations from precomputed [`log_distances`].
    pub fn correlations_from_log_dist(&self, log_dist: &[f64], r: &mut Vec<f64>) {
        let n = self.train.len();
        r.clear();
        r.resize(n, 0.0);
        for (j, (&theta, &p)) in self.psi.theta.iter().zip(&self.psi.power).enumerate() {
            let ld = &log_dist[j * n..(j + 1) * n];
            for (s, &l) in r.iter_mut().zip(ld) {
                *s += theta * exp_unrolled(p * l);
            }
        }
        for s in r.iter_mut() {
            *s = exp_unrolled(-*s);
        }
    }

    #[inline]
    pub fn mean_from_correlations(&self, r: &[f64]) -> f64 {
        self.mu + dot(r, &self.alpha)
    }

    /// Predictive variance from correlations; `r` is overwritten with `L⁻¹r`.
    pub fn variance_from_correlations(&self, r: &mut [f64]) -> f64 {
        let n = r.len();
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s = r[i] - dot(row, &r[..i]);
            r[i] = s / self.chol[i * n + i];
        }
        let rr = dot(r, r);
        let one_r = dot(&self.w_one, r);
        let v = self.sigma2 * (1.0 - rr + (1.0 - one_r).powi(2) / self.one_r_one);
        v.max(0.0)
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        let mut r = Vec::with_capacity(self.train.len());
        self.correlations(x, &mut r);
        self.mean_from_correlations(&r)
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut r = Vec::with_capacity(self.train.len());
        self.correlations(x, &mut r);
        let mean = self.mean_from_correlations(&r);
        let variance = self.variance_from_correlations(&mut r);
        Prediction {
            mean,
            variance,
            dof: self.train.len() - 1,
        }
    }
}

/// Pairwise log-distances of the training points with per-dimension kernel
/// contributions, so that changing one coordinate of `ψ` only recomputes that
/// dimension. Used by the MCMC sampler.
#[derive(Debug, Clone)]
pub(crate) struct KernelCache {
    n: usize,
    log_dist: Vec<Vec<f64>>,
    contrib: Vec<Vec<f64>>,
}

impl KernelCache {
    pub(crate) fn new(train: &TrainingSet, psi: &CorrelationParams) -> Self {
        let n = train.len();
        let d = train.dim();
        let pairs = n * (n - 1) / 2;
        let mut log_dist = vec![Vec::with_capacity(pairs); d];
        for i in 1..n {
            for k in 0..i {
                let (a, b) = (train.points().row(i), train.points().row(k));
                for j in 0..d {
                    log_dist[j].push((a[j] - b[j]).abs().ln());
                }
            }
        }
        let mut cache = KernelCache {
            n,
            log_dist,
            contrib: vec![vec![0.0; pairs]; d],
        };
        for j in 0..d {
            cache.set_dim(j, psi.theta[j], psi.power[j]);
        }
        cache
    }

    pub(crate) fn set_dim(&mut self, j: usize, theta: f64, p: f64) {
        for (c, &l) in self.contrib[j].iter_mut().zip(&self.log_dist[j]) {
            *c = theta * (p * l).exp();
        }
    }

    pub(crate) fn dim_contrib(&self, j: usize) -> &[f64] {
        &self.contrib[j]
    }

    pub(crate) fn restore_dim(&mut self, j: usize, saved: Vec<f64>) {
        self.contrib[j] = saved;
    }

    pub(crate) fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut corr = DMatrix::identity(n, n);
        let mut idx = 0;
        for i in 1..n {
            for k in 0..i {
                let s: f64 = self.contrib.iter().map(|c| c[idx]).sum();
                let c = (-s).exp();
                corr[(i, k)] = c;
                corr[(k, i)] = c;
                idx += 1;
            }
        }
        corr
    }
}

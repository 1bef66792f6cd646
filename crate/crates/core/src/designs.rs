//! Initial designs, Monte Carlo sets and stratified Monte Carlo sets.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::input_models::{self, InputModel, Marginal, Stratum};
use crate::points::PointSet;
use crate::seed;

/// Default cap on the size of a stratified set.
pub const STRATIFIED_CAP: usize = 1_000_000;

/// How a dimension's design bounds relate to simulator units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Bounds are in simulator units.
    Identity,
    /// Bounds are on the log scale; simulator value = `exp(bound coordinate)`.
    Exponential,
}

/// Per-dimension box used for uniform designs and for scaling inputs to the
/// GP's `[0, 1]` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
    transforms: Vec<Transform>,
}

impl DesignRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, transforms: Vec<Transform>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != transforms.len() {
            return Err(Error::invalid("design region bounds must have one entry per dimension"));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "dimension {j}: bounds [{lo}, {hi}] are not an interval"
                )));
            }
        }
        Ok(DesignRegion {
            lower,
            upper,
            transforms,
        })
    }

    /// Mean ± 3 sd per marginal (log scale for lognormals), data range for
    /// empirical marginals.
    pub fn from_model(model: &InputModel) -> Self {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut transforms = Vec::new();
        for m in model.marginals() {
            let (lo, hi, t) = m.design_interval();
            lower.push(lo);
            upper.push(hi);
            transforms.push(t);
        }
        DesignRegion::new(lower, upper, transforms).expect("marginal intervals are valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    /// Simulator units to `[0, 1]` coordinates (values outside the box map
    /// outside the unit interval).
    pub fn to_unit(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.dim() {
            let v = match self.transforms[j] {
                Transform::Identity => x[j],
                Transform::Exponential => x[j].ln(),
            };
            out[j] = (v - self.lower[j]) / (self.upper[j] - self.lower[j]);
        }
    }

    pub fn from_unit(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..self.dim() {
            let v = self.lower[j] + u[j] * (self.upper[j] - self.lower[j]);
            out[j] = match self.transforms[j] {
                Transform::Identity => v,
                Transform::Exponential => v.exp(),
            };
        }
    }

    pub fn scale_points(&self, points: &PointSet) -> PointSet {
        points.map_rows(self.dim(), |x, u| self.to_unit(x, u))
    }
}

/// `n0` points drawn from the input distribution.
pub fn random_design(model: &InputModel, n0: usize, seed_value: u64) -> PointSet {
    input_models::sample(model, n0, seed_value)
}

/// Random Latin hypercube over `region`: every column has exactly one point
/// in each of the `n0` equal bins, placed uniformly within its bin.
/// Exponential dimensions are stratified on the log scale.
pub fn uniform_lhd(region: &DesignRegion, n0: usize, seed_value: u64) -> PointSet {
    let mut rng = seed::rng(seed_value);
    let d = region.dim();
    let mut unit = vec![0.0; n0 * d];
    let mut perm: Vec<usize> = (0..n0).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        for (i, &bin) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            unit[i * d + j] = (bin as f64 + u) / n0 as f64;
        }
    }
    let unit = PointSet::from_flat(d, unit).expect("dimension matches");
    unit.map_rows(d, |u, x| region.from_unit(u, x))
}

/// `n` i.i.d. points forming the Monte Carlo set.
pub fn mc_set(model: &InputModel, n: usize, seed_value: u64) -> PointSet {
    input_models::sample(model, n, seed_value)
}

/// Monte Carlo set with equal allocation across all `2^d` stratum
/// combinations and the population weight of each stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSet {
    pub points: PointSet,
    /// Bit `j` set means dimension `j` was drawn from its upper stratum.
    pub stratum_id: Vec<usize>,
    /// Population probability of each stratum, indexed by stratum id.
    pub weights: Vec<f64>,
    pub per_stratum: usize,
}

impl StratifiedSet {
    pub fn n_strata(&self) -> usize {
        self.weights.len()
    }

    /// Weight of every point: stratum weight over stratum size.
    pub fn point_weights(&self) -> Vec<f64> {
        self.stratum_id
            .iter()
            .map(|&h| self.weights[h] / self.per_stratum as f64)
            .collect()
    }
}

/// Population weight `Π_j (natural_p_j or 1 - natural_p_j)` of stratum `h`.
pub fn stratum_weight(natural_p: &[f64], h: usize) -> f64 {
    natural_p
        .iter()
        .enumerate()
        .map(|(j, &p)| if h >> j & 1 == 0 { p } else { 1.0 - p })
        .product()
}

pub fn stratified_mc_set(
    model: &InputModel,
    per_stratum: usize,
    seed_value: u64,
    cap: usize,
) -> Result<StratifiedSet> {
    let natural_p: Vec<f64> = model
        .marginals()
        .iter()
        .enumerate()
        .map(|(j, m)| match m {
            Marginal::TwoStratum(mix) => Ok(mix.natural_p),
            _ => Err(Error::invalid(format!(
                "stratified sampling needs a two-stratum mixture in every dimension; \
                 dimension {j} is not one"
            ))),
        })
        .collect::<Result<_>>()?;
    let d = natural_p.len();
    if per_stratum == 0 {
        return Err(Error::invalid("per-stratum count must be at least 1"));
    }
    let n_strata = 1usize
        .checked_shl(d as u32)
        .filter(|_| d < usize::BITS as usize)
        .ok_or_else(|| Error::invalid(format!("{d} dimensions give too many strata")))?;
    let size = n_strata.saturating_mul(per_stratum);
    if size > cap {
        return Err(Error::Size {
            what: "stratified MC set".into(),
            size,
            cap,
        });
    }
    let mut rng = seed::rng(seed_value);
    let mut points = PointSet::with_capacity(d, size);
    let mut stratum_id = Vec::with_capacity(size);
    let mut row = vec![0.0; d];
    for h in 0..n_strata {
        for _ in 0..per_stratum {
            for (j, m) in model.marginals().iter().enumerate() {
                let s = if h >> j & 1 == 0 {
                    Stratum::Lower
                } else {
                    Stratum::Upper
                };
                row[j] = m.sample_stratum(s, &mut rng).expect("checked mixture");
            }
            points.push(&row)?;
            stratum_id.push(h);
        }
    }
    let weights = (0..n_strata).map(|h| stratum_weight(&natural_p, h)).collect();
    Ok(StratifiedSet {
        points,
        stratum_id,
        weights,
        per_stratum,
    })
}

//! Tail-probability and quantile estimates from surrogate predictions over a
//! Monte Carlo set, plain or stratum-weighted.

use crate::designs::StratifiedSet;
use crate::error::{Error, Result};

/// Tolerance on weight sums and weighted tail-mass comparisons.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Failure is `Y > y_f`.
    Upper,
    /// Failure is `Y < y_f`.
    Lower,
}

impl Direction {
    #[inline]
    pub fn in_tail(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Upper => value > threshold,
            Direction::Lower => value < threshold,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        }
    }
}

/// What a run estimates: the probability beyond a known threshold, or the
/// threshold with a given tail probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailTarget {
    Threshold(f64),
    Probability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSpec {
    pub direction: Direction,
    pub target: TailTarget,
}

impl TailSpec {
    pub fn validate(&self) -> Result<()> {
        match self.target {
            TailTarget::Threshold(y) if !y.is_finite() => {
                Err(Error::invalid(format!("threshold {y} is not finite")))
            }
            TailTarget::Probability(p) if !(p > 0.0 && p < 1.0) => {
                Err(Error::invalid(format!("tail probability {p} must lie in (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Fraction of predictions strictly beyond `y_f`.
pub fn prob_estimate(preds: &[f64], y_f: f64, direction: Direction) -> f64 {
    if preds.is_empty() {
        return f64::NAN;
    }
    let hits = preds.iter().filter(|&&v| direction.in_tail(v, y_f)).count();
    hits as f64 / preds.len() as f64
}

/// Binomial standard error of a plain Monte Carlo proportion.
pub fn prob_standard_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Total weight of predictions strictly beyond `y_f`.
pub fn weighted_prob_estimate(preds: &[f64], weights: &[f64], y_f: f64, direction: Direction) -> f64 {
    preds
        .iter()
        .zip(weights)
        .filter(|(&v, _)| direction.in_tail(v, y_f))
        .map(|(_, &w)| w)
        .sum()
}

fn check_stratum_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("stratum weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::invalid(format!(
            "stratum weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Per-stratum tail fractions and sizes.
fn stratum_fractions(
    set: &StratifiedSet,
    preds: &[f64],
    y_f: f64,
    direction: Direction,
) -> Result<Vec<(f64, usize)>> {
    if preds.len() != set.stratum_id.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} stratified points",
            preds.len(),
            set.stratum_id.len()
        )));
    }
    check_stratum_weights(&set.weights)?;
    let mut hits = vec![0usize; set.weights.len()];
    let mut sizes = vec![0usize; set.weights.len()];
    for (&h, &v) in set.stratum_id.iter().zip(preds) {
        sizes[h] += 1;
        hits[h] += usize::from(direction.in_tail(v, y_f));
    }
    if let Some(h) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("stratum {h} has no points")));
    }
    Ok(hits
        .iter()
        .zip(&sizes)
        .map(|(&k, &n)| (k as f64 / n as f64, n))
        .collect())
}

/// `Σ_h w_h · (tail fraction in stratum h)`.
pub fn stratified_prob_estimate(
    set: &StratifiedSet,
    preds: &[f64],
    y_f: f64,
    direction: Direction,
) -> Result<f64> {
    let fractions = stratum_fractions(set, preds, y_f, direction)?;
    Ok(set
        .weights
        .iter()
        .zip(&fractions)
        .map(|(w, (f, _))| w * f)
        .sum())
}

/// Estimated standard error `sqrt(Σ_h w_h² f_h (1 - f_h) / (n_h - 1))`.
pub fn stratified_standard_error(
    set: &StratifiedSet,
    preds: &[f64],
    y_f: f64,
    direction: Direction,
) -> Result<f64> {
    let fractions = stratum_fractions(set, preds, y_f, direction)?;
    Ok(set
        .weights
        .iter()
        .zip(&fractions)
        .map(|(w, &(f, n))| w * w * f * (1.0 - f) / (n.max(2) - 1) as f64)
        .sum::<f64>()
        .sqrt())
}

/// Weighted empirical quantile. For the upper tail this is the smallest
/// prediction `v` whose exceedance weight `W(pred > v)` is at most `p`; the
/// lower tail mirrors it (largest `v` with `W(pred < v) <= p`). `weights`
/// default to uniform.
pub fn quantile_estimate(
    preds: &[f64],
    weights: Option<&[f64]>,
    p: f64,
    direction: Direction,
) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid("quantile of an empty prediction set"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("tail probability {p} must lie in (0, 1)")));
    }
    if preds.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("predictions must be finite"));
    }
    let n = preds.len();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::invalid(format!("{} weights for {n} predictions", w.len())));
        }
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE * n as f64 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
    }
    let sign = match direction {
        Direction::Upper => 1.0,
        Direction::Lower => -1.0,
    };
    // Walk the (sign-adjusted) values from the largest down, accumulating the
    // weight strictly above the current value.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (sign * preds[b]).total_cmp(&(sign * preds[a])));
    let weight = |i: usize| weights.map_or(1.0 / n as f64, |w| w[i]);
    let mut above = 0.0;
    let mut above_count = 0usize;
    let mut best = sign * preds[order[0]];
    let mut k = 0;
    while k < n {
        let v = sign * preds[order[k]];
        let admissible = match weights {
            None => above_count as f64 <= p * n as f64 + WEIGHT_TOLERANCE,
            Some(_) => above <= p + WEIGHT_TOLERANCE,
        };
        if !admissible {
            break;
        }
        best = v;
        while k < n && sign * preds[order[k]] == v {
            above += weight(order[k]);
            above_count += 1;
            k += 1;
        }
    }
    Ok(sign * best)
}

pub fn stratified_quantile_estimate(
    set: &StratifiedSet,
    preds: &[f64],
    p: f64,
    direction: Direction,
) -> Result<f64> {
    check_stratum_weights(&set.weights)?;
    quantile_estimate(preds, Some(&set.point_weights()), p, direction)
}

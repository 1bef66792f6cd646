//! Acquisition criteria for locating the contour `y(x) = y_f`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::{Prediction, DUPLICATE_TOLERANCE};
use crate::points::{max_abs_distance, PointSet};

/// Predictive variances below this are treated as zero.
pub const VARIANCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    ExpectedImprovement,
    Discrepancy,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::ExpectedImprovement => "ei",
            Criterion::Discrepancy => "discrepancy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub criterion: Criterion,
    /// Half-width of the EI improvement band in predictive sd units.
    pub alpha: f64,
    /// Regularizer of the discrepancy criterion.
    pub epsilon: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            criterion: Criterion::Discrepancy,
            alpha: 1.96,
            epsilon: 0.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon = {} must be nonnegative",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub index: usize,
    pub score: f64,
    pub mean: f64,
    pub variance: f64,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Φ(b) - Φ(a)` for `a <= b`, computed from whichever tail avoids
/// cancellation.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    }
}

/// Expected value of the improvement `max(0, α²v - (Y - y_f)²)` for
/// `Y ~ N(m, v)`.
pub fn expected_improvement(pred: &Prediction, y_f: f64, alpha: f64) -> f64 {
    let v = pred.variance;
    if !(v > 0.0) {
        return 0.0;
    }
    let s = v.sqrt();
    let c = pred.mean - y_f;
    let w = -c / s;
    let (u1, u2) = (w - alpha, w + alpha);
    let mass = normal_mass(u1, u2);
    let (phi1, phi2) = (std_normal_pdf(u1), std_normal_pdf(u2));
    let ei = (alpha * alpha * v - c * c) * mass
        + v * ((u2 * phi2 - u1 * phi1) - mass)
        + 2.0 * c * s * (phi2 - phi1);
    ei.max(0.0)
}

/// `|m - y_f| / sd` (or `sqrt((m - y_f)² + ε) / sd`); `+∞` when the variance
/// is below [`VARIANCE_FLOOR`].
pub fn discrepancy_score(pred: &Prediction, y_f: f64, epsilon: f64) -> f64 {
    if !(pred.variance >= VARIANCE_FLOOR) {
        return f64::INFINITY;
    }
    let gap = pred.mean - y_f;
    let numerator = if epsilon > 0.0 {
        (gap * gap + epsilon).sqrt()
    } else {
        gap.abs()
    };
    numerator / pred.variance.sqrt()
}

/// Best admissible candidate: argmax EI or argmin discrepancy, ties to the
/// smallest index. Candidates within [`DUPLICATE_TOLERANCE`] of an excluded
/// point (both in scaled coordinates) are never chosen. A surrogate with no
/// predictive uncertainty anywhere scores every candidate `+∞` (or EI 0); the
/// tie then goes to the first admissible candidate.
pub fn select_next(
    candidates: &PointSet,
    predictions: &[Prediction],
    cfg: &AcquisitionConfig,
    target: f64,
    exclusions: &PointSet,
) -> Result<ScoredCandidate> {
    if candidates.nrows() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} predictions",
            candidates.nrows(),
            predictions.len()
        )));
    }
    let mut best: Option<ScoredCandidate> = None;
    for (i, (x, pred)) in candidates.rows().zip(predictions).enumerate() {
        if exclusions
            .rows()
            .any(|e| max_abs_distance(e, x) <= DUPLICATE_TOLERANCE)
        {
            continue;
        }
        let (score, better) = match cfg.criterion {
            Criterion::ExpectedImprovement => {
                let s = expected_improvement(pred, target, cfg.alpha);
                (s, best.is_none_or(|b| s > b.score))
            }
            Criterion::Discrepancy => {
                let s = discrepancy_score(pred, target, cfg.epsilon);
                (s, best.is_none_or(|b| s < b.score))
            }
        };
        if !score.is_nan() && better {
            best = Some(ScoredCandidate {
                index: i,
                score,
                mean: pred.mean,
                variance: pred.variance,
            });
        }
    }
    best.ok_or_else(|| {
        Error::Selection(format!(
            "all {} candidates coincide with training points",
            candidates.nrows()
        ))
    })
}

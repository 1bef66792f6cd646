//! Convergence diagnostic: the distribution over the Monte Carlo set of the
//! negative standardized distance to the contour, `-|m(x) - y_f| / sd(x)`.
//!
//! When most of the set is many predictive standard deviations away from the
//! contour, further evaluations are unlikely to change the estimate. The
//! diagnostic is advisory and never stops a run.

use crate::criteria::VARIANCE_FLOOR;
use crate::gp::Prediction;

pub const DEFAULT_THRESHOLD: f64 = -10.0;
pub const DEFAULT_WINDOW: usize = 2;

/// Five-number summary of one iteration's diagnostic values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// Points skipped because their predictive variance is numerically zero,
    /// which happens exactly at training points.
    pub n_excluded: usize,
}

/// Pointwise values `-|m - y_f| / sd`, skipping zero-variance points.
pub fn diagnostic_values(preds: &[Prediction], y_f: f64) -> (Vec<f64>, usize) {
    let mut values = Vec::with_capacity(preds.len());
    let mut excluded = 0;
    for p in preds {
        if p.variance >= VARIANCE_FLOOR {
            let s = (p.mean - y_f).abs() / p.variance.sqrt();
            values.push(if s == 0.0 { 0.0 } else { -s });
        } else {
            excluded += 1;
        }
    }
    (values, excluded)
}

/// Linear-interpolation quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of one iteration. If every point is excluded the quantiles are NaN.
pub fn diagnostic_step(preds: &[Prediction], y_f: f64) -> DiagnosticSummary {
    let (mut values, n_excluded) = diagnostic_values(preds, y_f);
    if values.is_empty() {
        return DiagnosticSummary {
            min: f64::NAN,
            q25: f64::NAN,
            median: f64::NAN,
            q75: f64::NAN,
            max: f64::NAN,
            n_excluded,
        };
    }
    values.sort_by(f64::total_cmp);
    DiagnosticSummary {
        min: values[0],
        q25: sorted_quantile(&values, 0.25),
        median: sorted_quantile(&values, 0.5),
        q75: sorted_quantile(&values, 0.75),
        max: values[values.len() - 1],
        n_excluded,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFlag {
    pub converged: bool,
    pub note: Option<String>,
}

/// True when the median has been below `threshold` for each of the last
/// `window` iterations.
pub fn convergence_flag(trace: &[DiagnosticSummary], threshold: f64, window: usize) -> ConvergenceFlag {
    if window == 0 || trace.len() < window {
        return ConvergenceFlag {
            converged: false,
            note: Some(format!(
                "not enough data: {} iterations, window {window}",
                trace.len()
            )),
        };
    }
    ConvergenceFlag {
        converged: trace[trace.len() - window..]
            .iter()
            .all(|s| s.median < threshold),
        note: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(pairs: &[(f64, f64)]) -> Vec<Prediction> {
        pairs
            .iter()
            .map(|&(mean, variance)| Prediction {
                mean,
                variance,
                dof: 5,
            })
            .collect()
    }

    fn with_median(m: f64) -> DiagnosticSummary {
        DiagnosticSummary {
            min: m,
            q25: m,
            median: m,
            q75: m,
            max: m,
            n_excluded: 0,
        }
    }

    #[test]
    fn on_contour_is_zero() {
        let s = diagnostic_step(&preds(&[(1.0, 2.0), (1.0, 0.5)]), 1.0);
        assert_eq!((s.min, s.median, s.max), (0.0, 0.0, 0.0));
        assert!(s.max.is_sign_positive());
    }

    #[test]
    fn unit_offsets_give_minus_one() {
        let s = diagnostic_step(&preds(&[(1.0, 1.0), (-1.0, 1.0), (1.0, 1.0)]), 0.0);
        assert_eq!([s.min, s.q25, s.median, s.q75, s.max], [-1.0; 5]);
    }

    #[test]
    fn shrinking_variance_doubles_median() {
        let a: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 - 3.0, 1.0 + i as f64)).collect();
        let b: Vec<(f64, f64)> = a.iter().map(|&(m, v)| (m, v / 4.0)).collect();
        let sa = diagnostic_step(&preds(&a), 0.5);
        let sb = diagnostic_step(&preds(&b), 0.5);
        assert!((sb.median - 2.0 * sa.median).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_points_are_counted() {
        let s = diagnostic_step(&preds(&[(1.0, 0.0), (1.0, 1.0)]), 0.0);
        assert_eq!(s.n_excluded, 1);
        assert_eq!(s.median, -1.0);
        let all = diagnostic_step(&preds(&[(1.0, 0.0)]), 0.0);
        assert!(all.median.is_nan());
    }

    #[test]
    fn flag_examples() {
        let t = [with_median(-12.0), with_median(-15.0)];
        assert!(convergence_flag(&t, DEFAULT_THRESHOLD, DEFAULT_WINDOW).converged);
        let t = [with_median(-12.0), with_median(-3.0)];
        assert!(!convergence_flag(&t, DEFAULT_THRESHOLD, DEFAULT_WINDOW).converged);
        let short = convergence_flag(&[with_median(-20.0)], DEFAULT_THRESHOLD, DEFAULT_WINDOW);
        assert!(!short.converged && short.note.is_some());
    }

    #[test]
    fn flag_monotone_in_threshold() {
        let t = [with_median(-12.0), with_median(-9.0), with_median(-11.0)];
        for w in 1..=3 {
            let mut prev = false;
            for thr in [-20.0, -12.0, -10.0, -5.0, 0.0] {
                let now = convergence_flag(&t, thr, w).converged;
                assert!(!prev || now);
                prev = now;
            }
        }
    }

    #[test]
    fn summaries_are_ordered_and_nonpositive() {
        let mut rng = crate::seed::rng(2);
        use rand::Rng;
        let p: Vec<(f64, f64)> = (0..101)
            .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.01..3.0)))
            .collect();
        let s = diagnostic_step(&preds(&p), 0.3);
        assert!(s.min <= s.q25 && s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
        assert!(s.max <= 0.0);
    }
}

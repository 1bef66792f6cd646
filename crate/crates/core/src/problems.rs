//! Built-in benchmark problems and brute-force truth oracles.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{prob_standard_error, quantile_estimate, Direction, TailSpec, TailTarget};
use crate::input_models::{self, InputModel, Marginal};
use crate::seed;
use crate::sequential::{evaluate, BlackBox};

/// Cross-section of the short column: width `b` and depth `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortColumnSpec {
    pub b: f64,
    pub h: f64,
}

impl Default for ShortColumnSpec {
    fn default() -> Self {
        ShortColumnSpec { b: 3.0, h: 10.0 }
    }
}

impl ShortColumnSpec {
    pub fn new(b: f64, h: f64) -> Result<Self> {
        if !(b > 0.0 && h > 0.0 && b.is_finite() && h.is_finite()) {
            return Err(Error::invalid(format!("short column needs b, h > 0 (got {b}, {h})")));
        }
        Ok(ShortColumnSpec { b, h })
    }
}

/// Limit state `1 - 4 x_m / (b h² x_z) - x_p² / (b² h² x_z²)` for bending
/// moment `x_m`, axial force `x_p` and yield stress `x_z`; negative values
/// are failures.
pub fn short_column(x: &[f64], spec: &ShortColumnSpec) -> Result<f64> {
    let [x_m, x_p, x_z] = x else {
        return Err(Error::invalid(format!("short column takes 3 inputs, got {}", x.len())));
    };
    if !(*x_z > 0.0) {
        return Err(Error::invalid(format!("yield stress must be positive, got {x_z}")));
    }
    let bh2 = spec.b * spec.h * spec.h;
    let ratio = x_p / (spec.b * spec.h * x_z);
    Ok(1.0 - 4.0 * x_m / (bh2 * x_z) - ratio * ratio)
}

/// Bending moment N(2000, 400), axial force N(500, 100), yield stress
/// lognormal with log-scale mean 5 and sd 0.5.
pub fn short_column_model() -> InputModel {
    InputModel::with_names(
        vec![
            Marginal::Normal {
                mean: 2000.0,
                sd: 400.0,
            },
            Marginal::Normal {
                mean: 500.0,
                sd: 100.0,
            },
            Marginal::LogNormal {
                log_mean: 5.0,
                log_sd: 0.5,
            },
        ],
        vec!["x_m".into(), "x_p".into(), "x_z".into()],
    )
    .expect("valid short column model")
}

pub fn short_column_box(spec: ShortColumnSpec) -> BlackBox {
    BlackBox::function("short_column", 3, move |x| {
        short_column(x, &spec).unwrap_or(f64::NAN)
    })
}

/// Coordinates `(x_m / x_z, (x_p / x_z)²)` in which the limit state is affine:
/// `y = 1 - 4 t1 / (b h²) - t2 / (b² h²)`.
pub fn t_transform(x: &[f64]) -> (f64, f64) {
    (x[0] / x[2], (x[1] / x[2]).powi(2))
}

/// `y = Σ c_j x_j`.
pub fn linear_box(coefficients: Vec<f64>) -> BlackBox {
    let dim = coefficients.len();
    BlackBox::function("linear", dim, move |x| {
        x.iter().zip(&coefficients).map(|(a, c)| a * c).sum()
    })
}

/// Brute-force Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

const CHUNK: usize = 100_000;

/// Direct Monte Carlo truth: the tail probability (binomial standard error)
/// or the quantile (standard error from the spread of the order statistics
/// at `p ± sqrt(p(1-p)/N)`). Chunks are evaluated in parallel with their own
/// seed streams, so the result does not depend on the thread count.
pub fn brute_force_truth(
    black_box: &BlackBox,
    model: &InputModel,
    tail: &TailSpec,
    n_big: usize,
    seed_value: u64,
) -> Result<TruthEstimate> {
    tail.validate()?;
    if n_big == 0 {
        return Err(Error::invalid("oracle sample size must be positive"));
    }
    if black_box.dim() != model.dim() {
        return Err(Error::invalid(format!(
            "black box takes {} inputs but the model has {}",
            black_box.dim(),
            model.dim()
        )));
    }
    let n_chunks = n_big.div_ceil(CHUNK);
    let chunk_values = |k: usize| -> Result<Vec<f64>> {
        let len = CHUNK.min(n_big - k * CHUNK);
        let xs = input_models::sample(model, len, seed::derive(seed_value, &format!("chunk-{k}")));
        xs.rows().map(|x| evaluate(black_box, x)).collect()
    };
    match tail.target {
        TailTarget::Threshold(y_f) => {
            let hits = (0..n_chunks)
                .into_par_iter()
                .map(|k| {
                    let ys = chunk_values(k)?;
                    Ok(ys.iter().filter(|&&y| tail.direction.in_tail(y, y_f)).count())
                })
                .collect::<Result<Vec<usize>>>()?
                .into_iter()
                .sum::<usize>();
            let p = hits as f64 / n_big as f64;
            Ok(TruthEstimate {
                value: p,
                std_error: prob_standard_error(p, n_big),
                n: n_big,
            })
        }
        TailTarget::Probability(p) => {
            let ys: Vec<f64> = (0..n_chunks)
                .into_par_iter()
                .map(chunk_values)
                .collect::<Result<Vec<_>>>()?
                .concat();
            let value = quantile_estimate(&ys, None, p, tail.direction)?;
            let delta = prob_standard_error(p, n_big);
            let at = |q: f64| quantile_estimate(&ys, None, q.clamp(1e-12, 1.0 - 1e-12), tail.direction);
            let spread = (at(p + delta)? - at(p - delta)?).abs();
            Ok(TruthEstimate {
                value,
                std_error: 0.5 * spread,
                n: n_big,
            })
        }
    }
}

/// `p` for the upper tail of `Σ c_j X_j` with independent normal inputs.
pub fn linear_normal_tail(coefficients: &[f64], means: &[f64], sds: &[f64], y_f: f64, direction: Direction) -> f64 {
    let mean: f64 = coefficients.iter().zip(means).map(|(c, m)| c * m).sum();
    let sd = coefficients
        .iter()
        .zip(sds)
        .map(|(c, s)| (c * s).powi(2))
        .sum::<f64>()
        .sqrt();
    let below = input_models::std_normal_cdf((y_f - mean) / sd);
    match direction {
        Direction::Upper => 1.0 - below,
        Direction::Lower => below,
    }
}

/// Shared handle for registering problems by name.
pub fn builtin(name: &str, spec: ShortColumnSpec) -> Option<(Arc<BlackBox>, InputModel)> {
    match name {
        "short_column" => Some((Arc::new(short_column_box(spec)), short_column_model())),
        _ => None,
    }
}

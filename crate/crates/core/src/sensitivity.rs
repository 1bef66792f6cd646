//! Functional-ANOVA screening of a fitted surrogate: variance shares of the
//! main effects and two-way interactions of the predictive mean, plus
//! main-effect curves with approximate pointwise bands.
//!
//! Effects are averages of the predictive mean over a base sample from the
//! input distribution, evaluated on a grid of input quantiles and
//! interpolated back to the base rows when their variances are taken. Every effect
//! is computed from the same base rows, so the decomposition of an exactly
//! additive mean has zero interaction terms rather than Monte Carlo noise.

use rayon::prelude::*;

use std::sync::Arc;

use crate::designs::{self, DesignRegion};
use crate::error::{Error, Result};
use crate::gp::{Prediction, TrainingSet};
use crate::input_models::{self, InputModel};
use crate::points::PointSet;
use crate::posterior::{fit_psi, FitMethod, PsiPrior, Surrogate};
use crate::sequential::{evaluate, BlackBox};
use crate::seed;

pub const DEFAULT_GRID_POINTS: usize = 21;
pub const DEFAULT_MC_BASE: usize = 2000;
/// Base rows used for the two-way interaction grids.
pub const PAIR_BASE: usize = 250;

/// Anything that predicts at points given in simulator units.
pub trait Emulator: Sync {
    fn dim(&self) -> usize;
    fn predict_batch(&self, points: &PointSet) -> Vec<Prediction>;

    fn mean_batch(&self, points: &PointSet) -> Vec<f64> {
        self.predict_batch(points).iter().map(|p| p.mean).collect()
    }
}

/// A surrogate together with the scaling of its inputs.
pub struct ScaledSurrogate<'a> {
    pub surrogate: &'a Surrogate,
    pub region: &'a DesignRegion,
}

impl Emulator for ScaledSurrogate<'_> {
    fn dim(&self) -> usize {
        self.region.dim()
    }

    fn predict_batch(&self, points: &PointSet) -> Vec<Prediction> {
        self.surrogate.predict_batch(&self.region.scale_points(points))
    }

    fn mean_batch(&self, points: &PointSet) -> Vec<f64> {
        self.surrogate.mean_batch(&self.region.scale_points(points))
    }
}

/// Fits a screening surrogate to a Latin hypercube of `n` simulator runs
/// over the design region of `model`.
pub fn fit_screening_surrogate(
    model: &InputModel,
    black_box: &BlackBox,
    n: usize,
    fit: &FitMethod,
    prior: &PsiPrior,
    seed_value: u64,
) -> Result<(Surrogate, DesignRegion)> {
    if black_box.dim() != model.dim() {
        return Err(Error::invalid(format!(
            "black box takes {} inputs but the model has {}",
            black_box.dim(),
            model.dim()
        )));
    }
    let region = DesignRegion::from_model(model);
    let design = designs::uniform_lhd(&region, n, seed::derive(seed_value, "anova-design"));
    let ys = design.rows().map(|x| evaluate(black_box, x)).collect::<Result<Vec<_>>>()?;
    let train = Arc::new(TrainingSet::new(region.scale_points(&design), ys)?);
    let sample = fit_psi(&train, prior, fit, seed::derive(seed_value, "anova-chain"))?;
    Ok((Surrogate::new(train, sample)?, region))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaReport {
    pub names: Vec<String>,
    /// Percent of the predictive-mean variance per input.
    pub main_pct: Vec<f64>,
    /// Percent per input pair `(j, k)`, `j < k`, in lexicographic order.
    pub pair_pct: Vec<((usize, usize), f64)>,
    pub total_explained: f64,
    pub grid_points: usize,
    /// Variance of the predictive mean under the input distribution.
    pub total_variance: f64,
}

fn check_args(emulator: &dyn Emulator, model: &InputModel, grid_points: usize, mc_base: usize) -> Result<()> {
    if emulator.dim() != model.dim() {
        return Err(Error::invalid(format!(
            "emulator has {} inputs but the model has {}",
            emulator.dim(),
            model.dim()
        )));
    }
    if grid_points < 2 || mc_base < 2 {
        return Err(Error::invalid("grid and base sample need at least 2 points each"));
    }
    Ok(())
}

/// Grid nodes for one input: the sample minimum, the mid-quantiles
/// `(k + ½)/g` of the base column, and the sample maximum, so interpolation
/// between nodes covers every base value.
fn quantile_grid(column: &[f64], g: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut nodes = vec![sorted[0]];
    nodes.extend((0..g).map(|k| sorted[(((k as f64 + 0.5) / g as f64) * n as f64).floor().min((n - 1) as f64) as usize]));
    nodes.push(sorted[n - 1]);
    nodes.dedup();
    nodes
}

/// Index `i` and weight `t` with `x = (1 - t)·nodes[i] + t·nodes[i + 1]`,
/// clamped to the node range. A single node gives `(0, 0)`.
fn bracket(nodes: &[f64], x: f64) -> (usize, f64) {
    if nodes.len() < 2 {
        return (0, 0.0);
    }
    let i = nodes.partition_point(|&v| v <= x).clamp(1, nodes.len() - 1) - 1;
    let t = ((x - nodes[i]) / (nodes[i + 1] - nodes[i])).clamp(0.0, 1.0);
    (i, t)
}

fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let (i, t) = bracket(nodes, x);
    if t == 0.0 {
        values[i]
    } else {
        (1.0 - t) * values[i] + t * values[i + 1]
    }
}

/// Average prediction over the base rows with the listed coordinates fixed.
fn conditional_average(emulator: &dyn Emulator, base: &PointSet, fixed: &[(usize, f64)]) -> (f64, f64) {
    let mut pts = base.clone();
    for i in 0..pts.nrows() {
        let row = pts.row_mut(i);
        for &(j, v) in fixed {
            row[j] = v;
        }
    }
    let preds = emulator.predict_batch(&pts);
    let n = preds.len() as f64;
    (
        preds.iter().map(|p| p.mean).sum::<f64>() / n,
        preds.iter().map(|p| p.variance).sum::<f64>() / n,
    )
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn anova_decompose(
    emulator: &dyn Emulator,
    model: &InputModel,
    grid_points: usize,
    mc_base: usize,
    seed_value: u64,
) -> Result<AnovaReport> {
    check_args(emulator, model, grid_points, mc_base)?;
    let d = model.dim();
    let base = input_models::sample(model, mc_base, seed::derive(seed_value, "anova-base"));
    let grids: Vec<Vec<f64>> = (0..d).map(|j| quantile_grid(&base.column(j), grid_points)).collect();

    let base_means = emulator.mean_batch(&base);
    let f0 = mean_of(&base_means);
    let total_variance = base_means.iter().map(|y| (y - f0).powi(2)).sum::<f64>() / base_means.len() as f64;

    let main_effects = |rows: &PointSet| -> Vec<Vec<f64>> {
        (0..d)
            .into_par_iter()
            .map(|j| {
                grids[j]
                    .iter()
                    .map(|&g| conditional_average(emulator, rows, &[(j, g)]).0)
                    .collect()
            })
            .collect()
    };
    let mains = main_effects(&base);
    // Effect variances are averages over the base rows of the effects
    // interpolated from the grid, matching how the total variance is taken.
    let main_var: Vec<f64> = (0..d)
        .map(|j| {
            base.rows()
                .map(|x| (interpolate(&grids[j], &mains[j], x[j]) - f0).powi(2))
                .sum::<f64>()
                / mc_base as f64
        })
        .collect();

    // Interactions on a subsample; the mains and overall mean are recomputed
    // on the same rows so the subtraction is exact for additive means.
    let pair_rows = mc_base.min(PAIR_BASE);
    let sub = PointSet::from_flat(d, base.as_flat()[..pair_rows * d].to_vec())?;
    let sub_f0 = mean_of(&emulator.mean_batch(&sub));
    let sub_mains = if pair_rows == mc_base { mains.clone() } else { main_effects(&sub) };
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    let pair_var: Vec<f64> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let (gj, gk) = (&grids[j], &grids[k]);
            let mut effect = vec![0.0; gj.len() * gk.len()];
            for (a, &vj) in gj.iter().enumerate() {
                for (b, &vk) in gk.iter().enumerate() {
                    let joint = conditional_average(emulator, &sub, &[(j, vj), (k, vk)]).0;
                    effect[a * gk.len() + b] = joint - sub_mains[j][a] - sub_mains[k][b] + sub_f0;
                }
            }
            let at = |a: usize, b: usize| effect[a * gk.len() + b];
            base.rows()
                .map(|x| {
                    let (a, s) = bracket(gj, x[j]);
                    let (b, t) = bracket(gk, x[k]);
                    let a1 = (a + 1).min(gj.len() - 1);
                    let b1 = (b + 1).min(gk.len() - 1);
                    let v = (1.0 - s) * ((1.0 - t) * at(a, b) + t * at(a, b1))
                        + s * ((1.0 - t) * at(a1, b) + t * at(a1, b1));
                    v * v
                })
                .sum::<f64>()
                / mc_base as f64
        })
        .collect();

    let explained: f64 = main_var.iter().sum::<f64>() + pair_var.iter().sum::<f64>();
    let denom = total_variance.max(explained);
    let pct = |v: f64| if denom > 0.0 { 100.0 * v / denom } else { 0.0 };
    let main_pct: Vec<f64> = main_var.iter().map(|&v| pct(v)).collect();
    let pair_pct: Vec<((usize, usize), f64)> = pairs.iter().copied().zip(pair_var.iter().map(|&v| pct(v))).collect();
    let total_explained = main_pct.iter().sum::<f64>() + pair_pct.iter().map(|p| p.1).sum::<f64>();
    Ok(AnovaReport {
        names: model.names().to_vec(),
        main_pct,
        pair_pct,
        total_explained,
        grid_points,
        total_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    /// Predictive mean averaged over the other inputs.
    pub effect: f64,
    /// `effect ∓ 1.96 · sqrt(average predictive variance)`; approximate,
    /// since covariances across base rows are ignored.
    pub lower: f64,
    pub upper: f64,
}

pub fn main_effect_curve(
    emulator: &dyn Emulator,
    model: &InputModel,
    dim: usize,
    grid_points: usize,
    mc_base: usize,
    seed_value: u64,
) -> Result<Vec<CurvePoint>> {
    check_args(emulator, model, grid_points, mc_base)?;
    if dim >= model.dim() {
        return Err(Error::invalid(format!("no input {dim} in a {}-input model", model.dim())));
    }
    let base = input_models::sample(model, mc_base, seed::derive(seed_value, "anova-base"));
    let grid = quantile_grid(&base.column(dim), grid_points);
    Ok(grid
        .iter()
        .map(|&x| {
            let (effect, variance) = conditional_average(emulator, &base, &[(dim, x)]);
            let half = 1.96 * variance.max(0.0).sqrt();
            CurvePoint {
                x,
                effect,
                lower: effect - half,
                upper: effect + half,
            }
        })
        .collect())
}

//! Repeated sequential experiments comparing criteria and initial designs.
//!
//! Repeat `r` draws every seed from `derive(root, "repeat-{r}")`, so all
//! (design, criterion) cells of one repeat share the Monte Carlo set, the
//! candidate stream and, per design kind, the initial design. Cells run
//! concurrently on a pool of `jobs` threads; each run stays sequential.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{design_name, Settings};
use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::input_models::InputModel;
use crate::io::fmt_f64;
use crate::seed;
use crate::sequential::{self, BlackBox, DesignKind, Trace};

/// Outcome of one (repeat, design, criterion) cell.
#[derive(Debug)]
pub struct StudyRun {
    pub repeat: usize,
    pub design: DesignKind,
    pub criterion: Criterion,
    pub outcome: Result<(f64, Trace)>,
}

impl StudyRun {
    pub fn estimate(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(e, _)| *e)
    }

    /// The trace, including the partial trace of an aborted run.
    pub fn trace(&self) -> Option<&Trace> {
        match &self.outcome {
            Ok((_, t)) => Some(t),
            Err(Error::RunAborted { trace, .. }) => Some(trace),
            Err(_) => None,
        }
    }
}

#[derive(Debug)]
pub struct StudyResult {
    pub runs: Vec<StudyRun>,
    pub designs: Vec<DesignKind>,
    pub criteria: Vec<Criterion>,
    pub truth: Option<f64>,
}

/// Root seed of repeat `r`.
pub fn repeat_root(root: u64, r: usize) -> u64 {
    seed::derive(root, &format!("repeat-{r}"))
}

/// Runs every (repeat, design, criterion) cell of `settings`.
pub fn run_study(settings: &Settings, model: &InputModel, black_box: &BlackBox, jobs: usize) -> Result<StudyResult> {
    let mut cells = Vec::new();
    for r in 0..settings.repeats {
        for &design in &settings.repeat_designs {
            for &criterion in &settings.repeat_criteria {
                cells.push((r, design, criterion));
            }
        }
    }
    let base = settings.experiment(0);
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| {
        cells
            .par_iter()
            .map(|&(repeat, design, criterion)| {
                let mut cfg = settings.experiment(repeat_root(settings.seed, repeat));
                cfg.design = design;
                cfg.acquisition.criterion = criterion;
                let outcome = sequential::run(&cfg, model, black_box, settings.goal);
                if let Err(e) = &outcome {
                    log::warn!("repeat {repeat} {} {}: {e}", design_name(design), criterion.name());
                }
                StudyRun { repeat, design, criterion, outcome }
            })
            .collect()
    });
    Ok(StudyResult {
        runs,
        designs: settings.repeat_designs.clone(),
        criteria: settings.repeat_criteria.clone(),
        truth: settings.truth,
    })
}

/// Root-mean-square error of `estimates` about `truth`.
pub fn rmse(estimates: &[f64], truth: f64) -> f64 {
    (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64).sqrt()
}

impl StudyResult {
    pub fn cell(&self, design: DesignKind, criterion: Criterion) -> impl Iterator<Item = &StudyRun> {
        self.runs
            .iter()
            .filter(move |r| r.design == design && r.criterion == criterion)
    }

    /// Final estimates of the successful runs of one cell.
    pub fn final_estimates(&self, design: DesignKind, criterion: Criterion) -> Vec<f64> {
        self.cell(design, criterion).filter_map(StudyRun::estimate).collect()
    }

    /// RMSE of one cell's final estimates, or `None` without a truth or
    /// without successful runs.
    pub fn cell_rmse(&self, design: DesignKind, criterion: Criterion) -> Option<f64> {
        let truth = self.truth?;
        let est = self.final_estimates(design, criterion);
        (!est.is_empty()).then(|| rmse(&est, truth))
    }

    pub fn n_failed(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Long format: one row per run. Failed runs leave the estimate empty and
    /// carry the error text.
    pub fn results_csv(&self) -> String {
        let mut out = String::from("repeat,design,criterion,estimate");
        if self.truth.is_some() {
            out.push_str(",abs_error");
        }
        out.push_str(",status\n");
        for run in &self.runs {
            let _ = write!(out, "{},{},{}", run.repeat, design_name(run.design), run.criterion.name());
            match &run.outcome {
                Ok((e, _)) => {
                    let _ = write!(out, ",{}", fmt_f64(*e));
                    if let Some(t) = self.truth {
                        let _ = write!(out, ",{}", fmt_f64((e - t).abs()));
                    }
                    out.push_str(",ok\n");
                }
                Err(err) => {
                    out.push(',');
                    if self.truth.is_some() {
                        out.push(',');
                    }
                    let text = err.to_string().replace(['"', '\n'], " ");
                    let _ = writeln!(out, ",\"failed: {text}\"");
                }
            }
        }
        out
    }

    /// RMSE table: rows are initial designs, columns are criteria. `None`
    /// without a truth.
    pub fn rmse_csv(&self) -> Option<String> {
        self.truth?;
        let mut out = String::from("design");
        for c in &self.criteria {
            let _ = write!(out, ",{}", c.name());
        }
        out.push('\n');
        for &d in &self.designs {
            out.push_str(design_name(d));
            for &c in &self.criteria {
                out.push(',');
                if let Some(v) = self.cell_rmse(d, c) {
                    out.push_str(&fmt_f64(v));
                }
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Median across repeats of the estimate after each iteration, for one
    /// cell. Entry `i` is iteration `i + 1`; runs that aborted early
    /// contribute to the iterations they completed.
    pub fn median_path(&self, design: DesignKind, criterion: Criterion) -> Vec<f64> {
        let traces: Vec<&Trace> = self.cell(design, criterion).filter_map(StudyRun::trace).collect();
        let len = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let mut v: Vec<f64> = traces.iter().filter_map(|t| t.records.get(i)).map(|r| r.estimate).collect();
                v.sort_by(f64::total_cmp);
                let m = v.len();
                if m % 2 == 1 {
                    v[m / 2]
                } else {
                    0.5 * (v[m / 2 - 1] + v[m / 2])
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemSpec;
    use crate::input_models::Marginal;
    use crate::posterior::McmcConfig;
    use crate::sequential::{CandidatePolicy, McPolicy};

    fn small_settings() -> Settings {
        let mut s = Settings::default();
        s.problem = ProblemSpec::Linear(vec![1.0, 1.0]);
        s.inputs = vec![
            ("a".into(), crate::config::MarginalSpec::Normal(0.0, 1.0)),
            ("b".into(), crate::config::MarginalSpec::Normal(0.0, 1.0)),
        ];
        s.threshold = -3.0;
        s.n0 = 6;
        s.n_plus = 3;
        s.mc = McPolicy::Iid { size: 2000 };
        s.candidates = CandidatePolicy::Fresh { size: 200 };
        s.mcmc = McmcConfig { burn_in: 20, thin: 1, draws: 5, ..McmcConfig::default() };
        s.repeats = 2;
        s.truth = Some(0.0169);
        s.diagnostics = false;
        s
    }

    fn model() -> InputModel {
        InputModel::new(vec![Marginal::normal(0.0, 1.0).unwrap(), Marginal::normal(0.0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn rmse_of_one_value_is_absolute_error() {
        assert_eq!(rmse(&[0.003], 0.0025), (0.003f64 - 0.0025).abs());
        assert!((rmse(&[1.0, 3.0], 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn study_layout_and_shared_designs() {
        let s = small_settings();
        let res = run_study(&s, &model(), &s.black_box(), 2).unwrap();
        assert_eq!(res.runs.len(), 2 * 2 * 2);
        assert_eq!(res.n_failed(), 0);
        // Both criteria of one repeat and design start from the same points.
        for r in 0..2 {
            let inits: Vec<_> = res
                .runs
                .iter()
                .filter(|run| run.repeat == r && run.design == DesignKind::Random)
                .map(|run| run.trace().unwrap().initial.clone())
                .collect();
            assert_eq!(inits[0], inits[1]);
        }
        let table = res.rmse_csv().unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "design,discrepancy,ei");
        assert!(lines[1].starts_with("random,") && lines[2].starts_with("uniform,"));
        assert_eq!(res.results_csv().lines().count(), 1 + 8);
        assert_eq!(res.median_path(DesignKind::Random, Criterion::Discrepancy).len(), 3);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut s = small_settings();
        s.repeats = 1;
        let a = run_study(&s, &model(), &s.black_box(), 1).unwrap();
        let b = run_study(&s, &model(), &s.black_box(), 3).unwrap();
        assert_eq!(a.results_csv(), b.results_csv());
    }

    #[test]
    fn no_truth_drops_rmse() {
        let mut s = small_settings();
        s.repeats = 1;
        s.truth = None;
        s.repeat_criteria = vec![Criterion::Discrepancy];
        let res = run_study(&s, &model(), &s.black_box(), 1).unwrap();
        assert!(res.rmse_csv().is_none());
        let csv = res.results_csv();
        assert!(csv.starts_with("repeat,design,criterion,estimate,status\n"));
        assert!(!csv.contains("abs_error"));
    }
}

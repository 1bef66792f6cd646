//! Acceptance criteria A1 to A11. Each test prints one `PASS` or `FAIL` line
//! with the measured values, then asserts.
//!
//! The sequential studies (A2, A3, A4, A10) run at the published scale
//! (n0 = 20, 20 iterations, 10⁵ Monte Carlo points, 10⁴ candidates, 10
//! repeats) except that each fit keeps 20 posterior draws instead of 100,
//! which keeps a study near half an hour on one core.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use raretail::config::Settings;
use raretail::criteria::{expected_improvement, Criterion};
use raretail::designs::{stratified_mc_set, uniform_lhd, DesignRegion, Transform};
use raretail::estimation::{quantile_estimate, stratified_prob_estimate, stratified_standard_error, weighted_prob_estimate, Direction};
use raretail::gp::{conditional_predict, factorize, CorrelationParams, Prediction, TrainingSet};
use raretail::input_models::{InputModel, Marginal};
use raretail::posterior::{mixture_predict, sample_psi, FitMethod, McmcConfig, PsiPrior};
use raretail::problems::short_column_model;
use raretail::sensitivity::{anova_decompose, fit_screening_surrogate, ScaledSurrogate};
use raretail::sequential::{self, BlackBox, DesignKind, Goal};
use raretail::study::{self, StudyResult};
use raretail::{seed, PointSet};

const BIN: &str = env!("CARGO_BIN_EXE_raretail");
const TRUE_PROBABILITY: f64 = 0.0025;
const TRUE_QUANTILE: f64 = 0.0;
const STUDY_DRAWS: usize = 20;

/// Writes straight to the process stdout so the line shows up even when
/// the harness captures test output.
fn report(id: &str, pass: bool, detail: &str) -> bool {
    let line = format!("{id} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    pass
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn study_settings(goal: Goal) -> Settings {
    let mut s = Settings::default();
    s.mcmc.draws = STUDY_DRAWS;
    s.diagnostics = false;
    s.repeats = 10;
    s.goal = goal;
    s.direction = Direction::Lower;
    match goal {
        Goal::Probability => {
            s.threshold = 0.0;
            s.truth = Some(TRUE_PROBABILITY);
        }
        Goal::Quantile => {
            s.probability = TRUE_PROBABILITY;
            s.truth = Some(TRUE_QUANTILE);
        }
    }
    s
}

fn run_study(goal: Goal) -> StudyResult {
    let settings = study_settings(goal);
    let started = Instant::now();
    let result = study::run_study(&settings, &settings.input_model().unwrap(), &settings.black_box(), jobs()).unwrap();
    eprintln!("{} study: {:.0} s", goal.name(), started.elapsed().as_secs_f64());
    result
}

fn probability_study() -> &'static StudyResult {
    static STUDY: OnceLock<StudyResult> = OnceLock::new();
    STUDY.get_or_init(|| run_study(Goal::Probability))
}

fn rmse_table(result: &StudyResult) -> String {
    let mut parts = Vec::new();
    for d in [DesignKind::Random, DesignKind::UniformLhd] {
        for c in [Criterion::Discrepancy, Criterion::ExpectedImprovement] {
            let v = result.cell_rmse(d, c).map_or("none".to_string(), |v| format!("{v:.3e}"));
            parts.push(format!("{}/{}={v}", if d == DesignKind::Random { "random" } else { "uniform" }, c.name()));
        }
    }
    format!("{} (failed runs: {})", parts.join(" "), result.n_failed())
}

#[test]
fn a1_truth_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = Command::new(BIN)
        .args(["oracle", "--n-big", "1000000", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    let secs = started.elapsed().as_secs_f64();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let value: f64 = row[2].parse().unwrap();
    let se: f64 = row[3].parse().unwrap();
    let pass = (value - TRUE_PROBABILITY).abs() <= 0.0005 && secs < 30.0;
    assert!(report("A1", pass, &format!("Pr(y<0) = {value} (se {se:.2e}), 1e6 samples in {secs:.2} s; want 0.0025 +- 0.0005 in < 30 s")));
}

#[test]
fn a2_discrepancy_beats_ei() {
    let res = probability_study();
    let mut pass = res.n_failed() == 0;
    for d in [DesignKind::Random, DesignKind::UniformLhd] {
        let disc = res.cell_rmse(d, Criterion::Discrepancy).unwrap_or(f64::INFINITY);
        let ei = res.cell_rmse(d, Criterion::ExpectedImprovement).unwrap_or(f64::INFINITY);
        pass &= disc < ei && disc < 1e-3;
    }
    assert!(report("A2", pass, &format!("final RMSE {}; want discrepancy < ei per design and discrepancy < 1e-3", rmse_table(res))));
}

#[test]
fn a3_discrepancy_converges_from_random_designs() {
    let res = probability_study();
    let path = res.median_path(DesignKind::Random, Criterion::Discrepancy);
    // Record i is iteration i + 1, fitted to n0 + i points, so i points added.
    let late: Vec<f64> = path.iter().skip(15).copied().collect();
    let pass = !late.is_empty() && late.iter().all(|m| (0.00125..=0.005).contains(m));
    let shown: Vec<String> = path.iter().map(|m| format!("{m:.5}")).collect();
    assert!(report(
        "A3",
        pass,
        &format!("median estimate by points added 0..: [{}]; want [0.00125, 0.005] from 15 added onward", shown.join(", "))
    ));
}

#[test]
fn a4_quantile_orderings() {
    let res = run_study(Goal::Quantile);
    let r = |d, c| res.cell_rmse(d, c).unwrap_or(f64::INFINITY);
    let (rd, re) = (r(DesignKind::Random, Criterion::Discrepancy), r(DesignKind::Random, Criterion::ExpectedImprovement));
    let (ud, ue) = (r(DesignKind::UniformLhd, Criterion::Discrepancy), r(DesignKind::UniformLhd, Criterion::ExpectedImprovement));
    let checks = [
        ("discrepancy<ei on random", rd < re),
        ("discrepancy<ei on uniform", ud < ue),
        ("uniform<random for discrepancy", ud < rd),
        ("uniform<random for ei", ue < re),
    ];
    let pass = res.n_failed() == 0 && checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    assert!(report(
        "A4",
        pass,
        &format!("final quantile RMSE {}; violated: [{}]", rmse_table(&res), failed.join("; "))
    ));
}

/// Simpson's rule on the improvement band with 20000 panels.
fn ei_by_simpson(m: f64, v: f64, y_f: f64, alpha: f64) -> f64 {
    let s = v.sqrt();
    let (a, b) = (y_f - alpha * s, y_f + alpha * s);
    let n = 20_000;
    let h = (b - a) / n as f64;
    let f = |y: f64| {
        let z = (y - m) / s;
        (alpha * alpha * v - (y - y_f).powi(2)) * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut total = f(a) + f(b);
    for k in 1..n {
        total += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

#[test]
fn a5_ei_closed_form() {
    let mut rng = seed::rng(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..100 {
        let m: f64 = rng.random_range(-2.0..2.0);
        let v: f64 = rng.random_range(0.05..3.0);
        let y_f: f64 = rng.random_range(-2.0..2.0);
        let alpha: f64 = rng.random_range(0.5..3.0);
        let closed = expected_improvement(&Prediction { mean: m, variance: v, dof: 10 }, y_f, alpha);
        let numeric = ei_by_simpson(m, v, y_f, alpha);
        // Tuples whose band lies far in a normal tail have EI at rounding
        // level; the absolute floor covers those.
        let err = (closed - numeric).abs();
        let rel = if numeric.abs() > 1e-12 { err / numeric.abs() } else { err };
        worst = worst.max(rel);
        count += 1;
    }
    let pass = worst < 1e-6;
    assert!(report("A5", pass, &format!("worst relative error over {count} tuples {worst:.2e}; want < 1e-6")));
}

#[test]
fn a6_gp_properties() {
    let mut rng = seed::rng(6);
    let mut worst_interp: f64 = 0.0;
    let mut worst_affine: f64 = 0.0;
    let mut min_variance = f64::INFINITY;
    let mut worst_dominance = f64::INFINITY;
    for case in 0..50 {
        let n = rng.random_range(3..=15);
        let d = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| (4.0 * v).cos()).sum::<f64>() + rng.random::<f64>()).collect();
        let train = TrainingSet::new(PointSet::from_rows(&rows).unwrap(), ys.clone()).unwrap();
        let psi = CorrelationParams::new(
            (0..d).map(|_| (rng.random::<f64>() * 5.0 - 2.0).exp()).collect(),
            (0..d).map(|_| 1.0 + rng.random::<f64>()).collect(),
        )
        .unwrap();
        let fac = factorize(&train, &psi).unwrap();
        let range = train.output_range();
        for (i, x) in rows.iter().enumerate() {
            let p = conditional_predict(x, &train, &psi, &fac);
            worst_interp = worst_interp.max((p.mean - ys[i]).abs() / range);
            min_variance = min_variance.min(p.variance);
        }
        let (a, b) = (rng.random_range(-4.0..4.0), rng.random_range(-50.0..50.0));
        let shifted = TrainingSet::new(train.points().clone(), ys.iter().map(|y| a * y + b).collect()).unwrap();
        let fac2 = factorize(&shifted, &psi).unwrap();
        let sample = sample_psi(&train, &PsiPrior::default(), &McmcConfig { burn_in: 30, thin: 1, draws: 6, ..McmcConfig::default() }, case).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let p = conditional_predict(&x, &train, &psi, &fac);
            let q = conditional_predict(&x, &shifted, &psi, &fac2);
            min_variance = min_variance.min(p.variance);
            let mean_err = (q.mean - (a * p.mean + b)).abs() / ((a * p.mean).abs() + b.abs() + 1.0);
            let var_err = (q.variance - a * a * p.variance).abs() / (a * a * p.variance).max(1e-300);
            worst_affine = worst_affine.max(mean_err).max(if p.variance > 1e-12 { var_err } else { 0.0 });
            let mix = mixture_predict(&x, &train, &sample).unwrap();
            let avg = mix.per_draw.iter().map(|t| t.1).sum::<f64>() / mix.per_draw.len() as f64;
            worst_dominance = worst_dominance.min(mix.variance - avg);
        }
    }
    let pass = worst_interp <= 1e-8 && min_variance >= 0.0 && worst_affine <= 1e-10 && worst_dominance >= -1e-12;
    assert!(report(
        "A6",
        pass,
        &format!(
            "50 instances: interpolation error {worst_interp:.1e} of range, min variance {min_variance:.1e}, \
             affine relative error {worst_affine:.1e}, min(mixture - average variance) {worst_dominance:.1e}"
        )
    ));
}

/// `Pr(U1 + U2 + U3 <= t)` for independent uniforms on [0, 1], `t <= 1`.
fn irwin_hall_cdf(t: f64) -> f64 {
    t.powi(3) / 6.0
}

#[test]
fn a7_stratified_estimator() {
    // Each input is Uniform(0, 1) written as a mixture of U(0, 0.1) and
    // U(0.1, 1) with natural weights (0.1, 0.9), sampled half and half.
    let marginal = || {
        Marginal::two_stratum(Marginal::uniform(0.0, 0.1).unwrap(), Marginal::uniform(0.1, 1.0).unwrap(), 0.5, 0.1).unwrap()
    };
    let model = InputModel::new(vec![marginal(), marginal(), marginal()]).unwrap();
    let threshold = 1.0;
    let truth = irwin_hall_cdf(threshold);
    let mut worst_z: f64 = 0.0;
    let mut outside = 0;
    for rep in 0..20 {
        let set = stratified_mc_set(&model, 50, seed::derive(7, &format!("replicate-{rep}")), 1_000_000).unwrap();
        let ys: Vec<f64> = set.points.rows().map(|x| x.iter().sum()).collect();
        let est = stratified_prob_estimate(&set, &ys, threshold, Direction::Lower).unwrap();
        let se = stratified_standard_error(&set, &ys, threshold, Direction::Lower).unwrap();
        let z = (est - truth).abs() / se;
        worst_z = worst_z.max(z);
        outside += usize::from(z > 3.0);
    }
    let pass = outside == 0;
    assert!(report(
        "A7",
        pass,
        &format!("8 strata x 50 points, Pr(sum < 1) = {truth:.5}: {outside} of 20 replicates beyond 3 se, largest |z| {worst_z:.2}")
    ));
}

/// Smallest candidate `v` among the predictions with weighted exceedance
/// at most `p` (upper tail), found by checking every candidate.
fn brute_force_upper_quantile(preds: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &v in preds {
        if weighted_prob_estimate(preds, weights, v, Direction::Upper) <= p + 1e-12 && v < best {
            best = v;
        }
    }
    best
}

#[test]
fn a8_lhd_and_quantile_exactness() {
    let mut rng = seed::rng(8);
    let mut lhd_ok = true;
    for case in 0..100 {
        let n0 = rng.random_range(2..=60);
        let d = rng.random_range(1..=6);
        let region = DesignRegion::new(vec![-1.0; d], vec![3.0; d], vec![Transform::Identity; d]).unwrap();
        let design = uniform_lhd(&region, n0, case);
        let unit = region.scale_points(&design);
        for j in 0..d {
            let mut counts = vec![0usize; n0];
            for u in unit.column(j) {
                counts[((u * n0 as f64).floor() as usize).min(n0 - 1)] += 1;
            }
            lhd_ok &= counts.iter().all(|&c| c == 1);
        }
    }

    let mut sets = 0usize;
    let mut quantile_ok = true;
    for n in 1..=8usize {
        for _ in 0..400 {
            // Small integer values force ties.
            let preds: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            for p in [0.01, 0.1, 0.25, 0.5, 0.77, 0.99] {
                sets += 1;
                let q = quantile_estimate(&preds, Some(&weights), p, Direction::Upper).unwrap();
                let oracle = brute_force_upper_quantile(&preds, &weights, p);
                let tail = weighted_prob_estimate(&preds, &weights, q, Direction::Upper);
                let smaller = preds.iter().copied().filter(|&v| v < q).fold(f64::NEG_INFINITY, f64::max);
                let tight = smaller == f64::NEG_INFINITY
                    || weighted_prob_estimate(&preds, &weights, smaller, Direction::Upper) > p;
                quantile_ok &= q == oracle && tail <= p + 1e-12 && tight;

                // The lower tail mirrors the upper tail of the negated values.
                let neg: Vec<f64> = preds.iter().map(|v| -v).collect();
                let lower = quantile_estimate(&preds, Some(&weights), p, Direction::Lower).unwrap();
                quantile_ok &= lower == -brute_force_upper_quantile(&neg, &weights, p);
            }
        }
    }
    let pass = lhd_ok && quantile_ok;
    assert!(report(
        "A8",
        pass,
        &format!("LHD bins exact for 100 (n0, d): {lhd_ok}; weighted quantile matches enumeration and round trip on {sets} cases: {quantile_ok}")
    ));
}

#[test]
fn a9_anova_sanity() {
    let model = InputModel::new(vec![Marginal::normal(0.0, 1.0).unwrap(); 3]).unwrap();
    let fit = FitMethod::Mcmc(McmcConfig { draws: 20, ..McmcConfig::default() });
    let prior = PsiPrior::default();
    let screen = |f: fn(&[f64]) -> f64, seed_value: u64| {
        let black_box = BlackBox::function("oracle", 3, f);
        let (surrogate, region) = fit_screening_surrogate(&model, &black_box, 40, &fit, &prior, seed_value).unwrap();
        let emulator = ScaledSurrogate { surrogate: &surrogate, region: &region };
        anova_decompose(&emulator, &model, 21, 1000, seed_value).unwrap()
    };
    let additive = screen(|x| x[0] + 2.0 * x[1] + 0.5 * x[2] * x[2], 91);
    let max_pair = additive.pair_pct.iter().map(|p| p.1).fold(0.0, f64::max);
    let single = screen(|x| (1.5 * x[1]).sin() + x[1], 92);
    let pass = max_pair < 1.0 && single.main_pct[1] > 95.0;
    assert!(report(
        "A9",
        pass,
        &format!(
            "additive: largest pair {max_pair:.3}% (mains {:.1?}); single factor: active input {:.2}%",
            additive.main_pct, single.main_pct[1]
        )
    ));
}

#[test]
fn a10_diagnostic_trend() {
    // Repeat 0 of the A2 study, random design, discrepancy, re-run with the
    // diagnostic recorded. Fresh candidates make the path independent of it.
    let mut settings = study_settings(Goal::Probability);
    settings.diagnostics = true;
    let mut cfg = settings.experiment(study::repeat_root(settings.seed, 0));
    cfg.design = DesignKind::Random;
    let (_, trace) = sequential::run(&cfg, &short_column_model(), &settings.black_box(), Goal::Probability).unwrap();
    let medians: Vec<f64> = trace.diagnostics().iter().map(|s| s.median).collect();
    let (first, last) = (medians[0], *medians.last().unwrap());
    let pass = last < -10.0 && last < first;
    assert!(report("A10", pass, &format!("median diagnostic first {first:.2}, final {last:.2}; want final < -10 and < first")));
}

fn cli(args: &[&str], dir: &Path) {
    let out = Command::new(BIN).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap())
        .map(|n| n.to_string())
        .collect()
}

#[test]
fn a11_manifest_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("run.txt"),
        "seed = 11\nn0 = 10\nn_plus = 6\nmc.size = 20000\ncandidates.size = 2000\nmcmc.draws = 20\nrepeat.count = 2\n",
    )
    .unwrap();
    cli(&["run", "--config", "run.txt", "--out-dir", "a"], p);
    cli(&["run", "--config", "a/manifest.txt", "--out-dir", "b"], p);
    let mut differ = same_files(&p.join("a"), &p.join("b"), &["trace.csv", "diagnostics.csv"]);

    cli(&["repeat", "--config", "run.txt", "--out-dir", "r1", "--jobs", "2"], p);
    cli(&["repeat", "--config", "r1/manifest.txt", "--out-dir", "r2"], p);
    let traces = [
        "trace-random-discrepancy.csv",
        "trace-random-ei.csv",
        "trace-uniform-discrepancy.csv",
        "trace-uniform-ei.csv",
        "results.csv",
    ];
    differ.extend(same_files(&p.join("r1"), &p.join("r2"), &traces));
    let pass = differ.is_empty();
    assert!(report(
        "A11",
        pass,
        &format!("run and repeat manifests re-run; differing files: [{}]", differ.join(", "))
    ));
}

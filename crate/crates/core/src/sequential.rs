//! The sequential estimation loop: fit, predict the Monte Carlo set,
//! estimate, acquire, evaluate, augment.

use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use wait_timeout::ChildExt;

use crate::criteria::{select_next, AcquisitionConfig};
use crate::designs::{self, DesignRegion, StratifiedSet, STRATIFIED_CAP};
use crate::diagnostics::{diagnostic_step, DiagnosticSummary};
use crate::error::{Error, Result};
use crate::estimation::{
    prob_estimate, quantile_estimate, stratified_prob_estimate, stratified_quantile_estimate,
    TailSpec, TailTarget,
};
use crate::gp::{Prediction, TrainingSet};
use crate::input_models::InputModel;
use crate::points::PointSet;
use crate::posterior::{fit_psi, FitMethod, PsiPrior, Surrogate};
use crate::seed;

pub type SimFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// External simulator invoked once per evaluation: one comma-separated line
/// of inputs on stdin, one number on stdout, exit status 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
    pub dim: usize,
    pub timeout: Duration,
}

impl ExternalCommand {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

    /// Parses a whitespace-separated command line.
    pub fn parse(command_line: &str, dim: usize) -> Result<Self> {
        let mut words = command_line.split_whitespace().map(String::from);
        let program = words
            .next()
            .ok_or_else(|| Error::invalid("external command is empty"))?;
        Ok(ExternalCommand {
            program,
            args: words.collect(),
            dim,
            timeout: Self::DEFAULT_TIMEOUT,
        })
    }
}

/// The simulator under study, treated as a deterministic black box.
#[derive(Clone)]
pub enum BlackBox {
    Function {
        name: String,
        dim: usize,
        f: Arc<SimFn>,
    },
    External(ExternalCommand),
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlackBox::Function { name, dim, .. } => {
                write!(f, "BlackBox::Function({name}, dim {dim})")
            }
            BlackBox::External(cmd) => write!(f, "BlackBox::External({cmd:?})"),
        }
    }
}

impl BlackBox {
    pub fn function(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BlackBox::Function {
            name: name.into(),
            dim,
            f: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BlackBox::Function { dim, .. } => *dim,
            BlackBox::External(cmd) => cmd.dim,
        }
    }
}

fn format_inputs(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

fn run_external(cmd: &ExternalCommand, x: &[f64]) -> Result<f64> {
    let describe = || format!("`{} {}`", cmd.program, cmd.args.join(" "));
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Evaluation(format!("cannot start {}: {e}", describe())))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // A simulator that exits without reading its input is not an error
        // in itself; its exit status and output decide.
        let _ = writeln!(stdin, "{}", format_inputs(x));
    }
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let status = match child.wait_timeout(cmd.timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Evaluation(format!(
                "{} timed out after {:?}",
                describe(),
                cmd.timeout
            )));
        }
    };
    let out = reader
        .join()
        .map_err(|_| Error::Evaluation("stdout reader panicked".into()))??;
    if !status.success() {
        let mut err = String::new();
        if let Some(mut e) = child.stderr.take() {
            let _ = e.read_to_string(&mut err);
        }
        return Err(Error::Evaluation(format!(
            "{} exited with {status}: {}",
            describe(),
            err.trim()
        )));
    }
    out.trim()
        .parse::<f64>()
        .map_err(|_| Error::Evaluation(format!("{} printed {:?}, not a number", describe(), out.trim())))
}

/// Runs the simulator at `x` (simulator units).
pub fn evaluate(black_box: &BlackBox, x: &[f64]) -> Result<f64> {
    if x.len() != black_box.dim() {
        return Err(Error::invalid(format!(
            "black box takes {} inputs, got {}",
            black_box.dim(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("evaluation point is not finite"));
    }
    let y = match black_box {
        BlackBox::Function { f, .. } => f(x),
        BlackBox::External(cmd) => run_external(cmd, x)?,
    };
    if !y.is_finite() {
        return Err(Error::Evaluation(format!(
            "non-finite output {y} at ({})",
            format_inputs(x)
        )));
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Drawn from the input distribution.
    Random,
    /// Random Latin hypercube over the mean ± 3 sd box.
    UniformLhd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McPolicy {
    Iid { size: usize },
    /// Equal allocation over all `2^d` strata of two-stratum mixtures.
    Stratified { per_stratum: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidatePolicy {
    /// A separate i.i.d. sample from the input distribution.
    Fresh { size: usize },
    /// The Monte Carlo set itself.
    McSet,
}

/// Seeds of every random stream in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub design: u64,
    pub mc: u64,
    pub candidate: u64,
    pub chain: u64,
    pub recheck: u64,
}

impl RunSeeds {
    pub fn from_root(root: u64) -> Self {
        RunSeeds {
            design: seed::derive(root, "design"),
            mc: seed::derive(root, "mc"),
            candidate: seed::derive(root, "candidate"),
            chain: seed::derive(root, "chain"),
            recheck: seed::derive(root, "recheck"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n0: usize,
    /// Loop iterations; `n_plus - 1` points are acquired.
    pub n_plus: usize,
    pub tail: TailSpec,
    pub acquisition: AcquisitionConfig,
    pub design: DesignKind,
    pub mc: McPolicy,
    pub candidates: CandidatePolicy,
    pub fit: FitMethod,
    pub prior: PsiPrior,
    pub seeds: RunSeeds,
    /// Re-evaluate one training point at the end and warn on mismatch.
    pub determinism_check: bool,
    /// Record the convergence diagnostic each iteration.
    pub diagnostics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n0: 20,
            n_plus: 20,
            tail: TailSpec {
                direction: crate::estimation::Direction::Lower,
                target: TailTarget::Threshold(0.0),
            },
            acquisition: AcquisitionConfig::default(),
            design: DesignKind::UniformLhd,
            mc: McPolicy::Iid { size: 100_000 },
            candidates: CandidatePolicy::Fresh { size: 10_000 },
            fit: FitMethod::default(),
            prior: PsiPrior::default(),
            seeds: RunSeeds::from_root(0),
            determinism_check: true,
            diagnostics: false,
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n0 < 2 {
            out.push(format!("n0 = {} must be at least 2", self.n0));
        }
        if self.n_plus < 1 {
            out.push("n_plus must be at least 1".into());
        }
        if let Err(e) = self.tail.validate() {
            out.push(format!("tail: {e}"));
        }
        if let Err(e) = self.acquisition.validate() {
            out.push(format!("acquisition: {e}"));
        }
        match self.mc {
            McPolicy::Iid { size: 0 } => out.push("mc.size must be positive".into()),
            McPolicy::Stratified { per_stratum: 0, .. } => {
                out.push("mc.per_stratum must be positive".into())
            }
            _ => {}
        }
        if let CandidatePolicy::Fresh { size: 0 } = self.candidates {
            out.push("candidates.size must be positive".into());
        }
        match &self.fit {
            FitMethod::Mcmc(m) => {
                if m.draws == 0 {
                    out.push("mcmc.draws must be positive".into());
                }
                if m.thin == 0 {
                    out.push("mcmc.thin must be positive".into());
                }
                if !(m.step_size >= 0.0 && m.step_size.is_finite()) {
                    out.push("mcmc.step_size must be nonnegative".into());
                }
                if !(m.target_acceptance > 0.0 && m.target_acceptance < 1.0) {
                    out.push("mcmc.target_acceptance must lie in (0, 1)".into());
                }
            }
            FitMethod::Map { starts } => {
                if *starts == 0 {
                    out.push("map.starts must be positive".into());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// The acquisition made at the end of an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub candidate_index: usize,
    /// Simulator units.
    pub x: Vec<f64>,
    pub y: f64,
    pub criterion_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based loop index.
    pub iteration: usize,
    /// Training-set size the estimate was computed from.
    pub n: usize,
    /// Probability estimate, or quantile estimate for quantile runs.
    pub estimate: f64,
    pub selection: Option<Selection>,
    pub max_jitter: f64,
    pub acceptance_rate: f64,
    pub diagnostic: Option<DiagnosticSummary>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Initial design (simulator units) with outputs.
    pub initial: Vec<(Vec<f64>, f64)>,
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    /// Black-box evaluations counted against the design budget.
    pub evaluations: usize,
    /// Extra evaluations spent on the determinism check.
    pub check_evaluations: usize,
}

impl Trace {
    pub fn final_estimate(&self) -> Option<f64> {
        self.records.last().map(|r| r.estimate)
    }

    pub fn diagnostics(&self) -> Vec<DiagnosticSummary> {
        self.records.iter().filter_map(|r| r.diagnostic).collect()
    }
}

enum McSet {
    Plain(PointSet),
    Stratified(StratifiedSet),
}

impl McSet {
    fn points(&self) -> &PointSet {
        match self {
            McSet::Plain(p) => p,
            McSet::Stratified(s) => &s.points,
        }
    }
}

/// Which tail quantity a run estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Probability,
    Quantile,
}

impl Goal {
    pub fn name(self) -> &'static str {
        match self {
            Goal::Probability => "probability",
            Goal::Quantile => "quantile",
        }
    }
}

/// Algorithm for `Pr(Y beyond y_f)`; the tail target must be a threshold.
pub fn run_probability(cfg: &ExperimentConfig, model: &InputModel, black_box: &BlackBox) -> Result<(f64, Trace)> {
    run(cfg, model, black_box, Goal::Probability)
}

/// Algorithm for the `p_f` tail quantile; the tail target must be a probability.
pub fn run_quantile(cfg: &ExperimentConfig, model: &InputModel, black_box: &BlackBox) -> Result<(f64, Trace)> {
    run(cfg, model, black_box, Goal::Quantile)
}

pub fn run(cfg: &ExperimentConfig, model: &InputModel, black_box: &BlackBox, goal: Goal) -> Result<(f64, Trace)> {
    cfg.validate()?;
    match (goal, cfg.tail.target) {
        (Goal::Probability, TailTarget::Threshold(_)) | (Goal::Quantile, TailTarget::Probability(_)) => {}
        (Goal::Probability, _) => {
            return Err(Error::Config(vec!["a probability run needs tail.threshold".into()]))
        }
        (Goal::Quantile, _) => {
            return Err(Error::Config(vec!["a quantile run needs tail.probability".into()]))
        }
    }
    if black_box.dim() != model.dim() {
        return Err(Error::invalid(format!(
            "black box takes {} inputs but the input model has {}",
            black_box.dim(),
            model.dim()
        )));
    }

    let region = DesignRegion::from_model(model);
    let initial = match cfg.design {
        DesignKind::Random => designs::random_design(model, cfg.n0, cfg.seeds.design),
        DesignKind::UniformLhd => designs::uniform_lhd(&region, cfg.n0, cfg.seeds.design),
    };
    let mc = match cfg.mc {
        McPolicy::Iid { size } => McSet::Plain(designs::mc_set(model, size, cfg.seeds.mc)),
        McPolicy::Stratified { per_stratum, cap } => McSet::Stratified(designs::stratified_mc_set(
            model,
            per_stratum,
            cfg.seeds.mc,
            if cap == 0 { STRATIFIED_CAP } else { cap },
        )?),
    };
    let fresh = match cfg.candidates {
        CandidatePolicy::Fresh { size } => Some(designs::mc_set(model, size, cfg.seeds.candidate)),
        CandidatePolicy::McSet => None,
    };
    let candidates = fresh.as_ref().unwrap_or_else(|| mc.points());
    let mc_scaled = region.scale_points(mc.points());
    let cand_scaled = fresh.as_ref().map(|c| region.scale_points(c));

    let mut trace = Trace::default();
    let abort = |cause: Error, trace: Trace| Error::RunAborted {
        cause: Box::new(cause),
        trace: Box::new(trace),
    };

    let mut ys = Vec::with_capacity(cfg.n0);
    for x in initial.rows() {
        match evaluate(black_box, x) {
            Ok(y) => {
                trace.evaluations += 1;
                trace.initial.push((x.to_vec(), y));
                ys.push(y);
            }
            Err(e) => return Err(abort(e, trace)),
        }
    }
    let mut train = match TrainingSet::new(region.scale_points(&initial), ys) {
        Ok(t) => t,
        Err(e) => return Err(abort(e, trace)),
    };

    for i in 1..=cfg.n_plus {
        match iterate(cfg, goal, i, &mc, &mc_scaled, candidates, cand_scaled.as_ref(), &region, black_box, &mut train, &mut trace) {
            Ok(()) => {}
            Err(e) => return Err(abort(e, trace)),
        }
    }

    if cfg.determinism_check {
        let mut rng = seed::rng(cfg.seeds.recheck);
        let k = rng.random_range(0..train.len());
        let x = match k < trace.initial.len() {
            true => trace.initial[k].0.clone(),
            false => trace
                .records
                .iter()
                .filter_map(|r| r.selection.as_ref())
                .nth(k - trace.initial.len())
                .expect("training point has a record")
                .x
                .clone(),
        };
        let expected = train.outputs()[k];
        match evaluate(black_box, &x) {
            Ok(y) => {
                trace.check_evaluations += 1;
                if (y - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                    let msg = format!(
                        "black box is not deterministic: re-evaluation at training point {k} gave {y}, first {expected}"
                    );
                    log::warn!("{msg}");
                    trace.warnings.push(msg);
                }
            }
            Err(e) => return Err(abort(e, trace)),
        }
    }

    let estimate = trace.final_estimate().expect("n_plus >= 1");
    Ok((estimate, trace))
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    cfg: &ExperimentConfig,
    goal: Goal,
    i: usize,
    mc: &McSet,
    mc_scaled: &PointSet,
    candidates: &PointSet,
    cand_scaled: Option<&PointSet>,
    region: &DesignRegion,
    black_box: &BlackBox,
    train: &mut TrainingSet,
    trace: &mut Trace,
) -> Result<()> {
    let chain_seed = seed::derive(cfg.seeds.chain, &format!("iteration-{i}"));
    let sample = fit_psi(train, &cfg.prior, &cfg.fit, chain_seed)?;
    for w in &sample.warnings {
        let msg = format!("iteration {i}: {w}");
        log::warn!("{msg}");
        trace.warnings.push(msg);
    }
    let acceptance_rate = sample.acceptance_rate;
    let surrogate = Surrogate::new(Arc::new(train.clone()), sample)?;
    let max_jitter = surrogate.max_jitter();
    if max_jitter > 0.0 {
        log::info!("iteration {i}: factorization needed jitter {max_jitter:e}");
    }

    let acquire = i < cfg.n_plus;
    // Variances over the Monte Carlo set are needed when it doubles as the
    // candidate set or for the diagnostic; otherwise means suffice.
    let mc_needs_variance = cfg.diagnostics || (acquire && cand_scaled.is_none());
    let mc_preds: Option<Vec<Prediction>> = mc_needs_variance.then(|| surrogate.predict_batch(mc_scaled));
    let means: Vec<f64> = match &mc_preds {
        Some(p) => p.iter().map(|p| p.mean).collect(),
        None => surrogate.mean_batch(mc_scaled),
    };

    let direction = cfg.tail.direction;
    let (estimate, target) = match (goal, cfg.tail.target, mc) {
        (Goal::Probability, TailTarget::Threshold(y_f), McSet::Plain(_)) => {
            (prob_estimate(&means, y_f, direction), y_f)
        }
        (Goal::Probability, TailTarget::Threshold(y_f), McSet::Stratified(s)) => {
            (stratified_prob_estimate(s, &means, y_f, direction)?, y_f)
        }
        (Goal::Quantile, TailTarget::Probability(p), McSet::Plain(_)) => {
            let q = quantile_estimate(&means, None, p, direction)?;
            (q, q)
        }
        (Goal::Quantile, TailTarget::Probability(p), McSet::Stratified(s)) => {
            let q = stratified_quantile_estimate(s, &means, p, direction)?;
            (q, q)
        }
        _ => unreachable!("goal and tail target checked before the loop"),
    };
    let diagnostic = mc_preds
        .as_ref()
        .filter(|_| cfg.diagnostics)
        .map(|p| diagnostic_step(p, target));

    let selection = if acquire {
        let (scaled, preds) = match cand_scaled {
            Some(c) => (c, surrogate.predict_batch(c)),
            None => (mc_scaled, mc_preds.expect("computed for acquisition")),
        };
        let best = select_next(scaled, &preds, &cfg.acquisition, target, train.points())?;
        let x = candidates.row(best.index).to_vec();
        let y = evaluate(black_box, &x)?;
        trace.evaluations += 1;
        let mut u = vec![0.0; x.len()];
        region.to_unit(&x, &mut u);
        train.push(&u, y)?;
        Some(Selection {
            candidate_index: best.index,
            x,
            y,
            criterion_value: best.score,
        })
    } else {
        None
    };
    log::debug!("iteration {i}: n = {}, estimate {estimate}", surrogate.train().len());
    trace.records.push(IterationRecord {
        iteration: i,
        n: surrogate.train().len(),
        estimate,
        selection,
        max_jitter,
        acceptance_rate,
        diagnostic,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::Direction;
    use crate::input_models::Marginal;
    use crate::posterior::McmcConfig;
    use crate::problems::{short_column_box, ShortColumnSpec};

    fn shell(script: &str, dim: usize) -> BlackBox {
        BlackBox::External(ExternalCommand {
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
            dim,
            timeout: Duration::from_secs(10),
        })
    }

    #[test]
    fn registered_short_column() {
        let b = short_column_box(ShortColumnSpec::default());
        let y = evaluate(&b, &[2000.0, 500.0, 5f64.exp()]).unwrap();
        assert!((y - 0.80771).abs() < 1e-5);
    }

    #[test]
    fn external_protocol() {
        assert_eq!(evaluate(&shell("read line; echo 0", 2), &[1.0, 2.0]).unwrap(), 0.0);
        let sum = shell("IFS=, read a b; echo \"$a + $b\" | bc -l 2>/dev/null || awk -v a=$a -v b=$b 'BEGIN{print a+b}'", 2);
        assert_eq!(evaluate(&sum, &[1.5, 2.0]).unwrap(), 3.5);
        for bad in ["read l; echo nan", "read l; echo hello", "read l; exit 3"] {
            assert!(matches!(evaluate(&shell(bad, 1), &[0.0]), Err(Error::Evaluation(_))), "{bad}");
        }
        let mut slow = ExternalCommand::parse("sleep 5", 1).unwrap();
        slow.timeout = Duration::from_millis(100);
        assert!(matches!(evaluate(&BlackBox::External(slow), &[0.0]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn nan_function_is_an_evaluation_error() {
        let b = BlackBox::function("nan", 1, |_| f64::NAN);
        assert!(matches!(evaluate(&b, &[0.0]), Err(Error::Evaluation(_))));
        assert!(evaluate(&b, &[0.0, 1.0]).is_err());
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n0: 6,
            n_plus: 4,
            tail: TailSpec {
                direction: Direction::Upper,
                target: TailTarget::Threshold(1.5),
            },
            mc: McPolicy::Iid { size: 2000 },
            candidates: CandidatePolicy::Fresh { size: 300 },
            fit: FitMethod::Mcmc(McmcConfig {
                burn_in: 50,
                draws: 10,
                thin: 2,
                ..McmcConfig::default()
            }),
            seeds: RunSeeds::from_root(11),
            diagnostics: true,
            ..ExperimentConfig::default()
        }
    }

    fn normal_model(d: usize) -> InputModel {
        InputModel::new(vec![Marginal::normal(0.0, 1.0).unwrap(); d]).unwrap()
    }

    #[test]
    fn budget_and_growth() {
        let b = crate::problems::linear_box(vec![1.0, 0.5]);
        let cfg = small_config();
        let (est, trace) = run_probability(&cfg, &normal_model(2), &b).unwrap();
        assert_eq!(trace.records.len(), 4);
        assert_eq!(trace.evaluations, cfg.n0 + cfg.n_plus - 1);
        assert_eq!(trace.check_evaluations, 1);
        for (k, r) in trace.records.iter().enumerate() {
            assert_eq!(r.n, cfg.n0 + k);
            assert_eq!(r.selection.is_some(), k + 1 < cfg.n_plus);
            assert!(r.diagnostic.is_some());
        }
        assert_eq!(Some(est), trace.final_estimate());
        assert!(trace.warnings.iter().all(|w| !w.contains("deterministic")));
        let again = run_probability(&cfg, &normal_model(2), &b).unwrap();
        assert_eq!(again.1, trace);
    }

    #[test]
    fn single_iteration_does_not_acquire() {
        let b = crate::problems::linear_box(vec![1.0]);
        let cfg = ExperimentConfig {
            n_plus: 1,
            ..small_config()
        };
        let (_, trace) = run_probability(&cfg, &normal_model(1), &b).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert!(trace.records[0].selection.is_none());
        assert_eq!(trace.evaluations, cfg.n0);
    }

    #[test]
    fn constant_box_quantile_is_the_constant() {
        let b = BlackBox::function("constant", 2, |_| 4.25);
        let cfg = ExperimentConfig {
            tail: TailSpec {
                direction: Direction::Lower,
                target: TailTarget::Probability(0.01),
            },
            ..small_config()
        };
        let (est, trace) = run_quantile(&cfg, &normal_model(2), &b).unwrap();
        assert_eq!(est, 4.25);
        assert!(trace.records.iter().all(|r| r.estimate == 4.25));
    }

    #[test]
    fn failing_box_aborts_with_partial_trace() {
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let b = BlackBox::function("flaky", 1, move |x| {
            if counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst) >= 7 {
                f64::NAN
            } else {
                x[0]
            }
        });
        let err = run_probability(&small_config(), &normal_model(1), &b).unwrap_err();
        let Error::RunAborted { cause, trace } = err else {
            panic!("expected an aborted run")
        };
        assert!(matches!(*cause, Error::Evaluation(_)));
        assert_eq!(trace.evaluations, 7);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn nondeterministic_box_is_flagged() {
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let b = BlackBox::function("drifting", 1, move |x| {
            x[0] + counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst) as f64 * 1e-3
        });
        let (_, trace) = run_probability(&small_config(), &normal_model(1), &b).unwrap();
        assert!(trace.warnings.iter().any(|w| w.contains("not deterministic")));
    }

    #[test]
    fn config_errors_list_every_field() {
        let cfg = ExperimentConfig {
            n0: 1,
            n_plus: 0,
            mc: McPolicy::Iid { size: 0 },
            ..ExperimentConfig::default()
        };
        let Err(Error::Config(list)) = cfg.validate() else {
            panic!("expected config errors")
        };
        assert_eq!(list.len(), 3);
    }
}

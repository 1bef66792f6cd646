//! Experiment settings in a flat `key = value` text format.
//!
//! Lines hold one `key = value` pair; `#` starts a comment; keys use dotted
//! sections (`mcmc.draws`). Every key has a default, [`Settings::to_text`]
//! writes the full canonical listing, and parsing that listing reproduces
//! the same settings, so a saved listing is a complete manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::criteria::{AcquisitionConfig, Criterion};
use crate::estimation::{Direction, TailSpec, TailTarget};
use crate::error::{Error, Result};
use crate::input_models::{self, InputModel, Marginal, WeibullParams};
use crate::io::{self, fmt_f64};
use crate::posterior::{FitMethod, McmcConfig, PsiPrior};
use crate::problems::{self, ShortColumnSpec};
use crate::sequential::{
    BlackBox, CandidatePolicy, DesignKind, ExperimentConfig, ExternalCommand, Goal, McPolicy, RunSeeds,
};

/// Simulator selected by the `problem` key.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    ShortColumn(ShortColumnSpec),
    /// `y = Σ c_j x_j`.
    Linear(Vec<f64>),
    External(ExternalCommand),
}

/// Textual description of one marginal, e.g. `normal(2000, 400)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalSpec {
    Normal(f64, f64),
    LogNormal(f64, f64),
    Uniform(f64, f64),
    Weibull(f64, f64, f64),
    /// Values from a single-column file.
    Empirical { path: PathBuf, header: bool },
    /// Two-stratum empirical mixture split at a data fraction.
    TailMixture { path: PathBuf, header: bool, split: f64, p1: f64 },
    /// Weibull fitted to the lower fraction of a data file, rest censored.
    CensoredWeibull { path: PathBuf, header: bool, lower_fraction: f64, params: WeibullParams },
    /// Explicit two-stratum mixture.
    Mixture { lower: Box<MarginalSpec>, upper: Box<MarginalSpec>, p1: f64, natural_p: f64 },
}

/// Splits `a, f(b, c), d` at top-level commas.
fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn num(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::invalid(format!("{s:?} is not a number")))
}

fn header_flag(s: Option<&String>) -> Result<bool> {
    match s.map(String::as_str) {
        None | Some("noheader") => Ok(false),
        Some("header") => Ok(true),
        Some(other) => Err(Error::invalid(format!("expected `header` or `noheader`, got {other:?}"))),
    }
}

fn resolve(path: &str, base_dir: &Path) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

impl MarginalSpec {
    /// Parses a spec; relative file paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let text = text.trim();
        let open = text
            .find('(')
            .filter(|_| text.ends_with(')'))
            .ok_or_else(|| Error::invalid(format!("{text:?} is not of the form kind(arguments)")))?;
        let kind = text[..open].trim();
        let args = split_args(&text[open + 1..text.len() - 1]);
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if args.len() < lo || args.len() > hi {
                Err(Error::invalid(format!("{kind} takes {lo} to {hi} arguments, got {}", args.len())))
            } else {
                Ok(())
            }
        };
        let spec = match kind {
            "normal" => {
                arity(2, 2)?;
                MarginalSpec::Normal(num(&args[0])?, num(&args[1])?)
            }
            "lognormal" => {
                arity(2, 2)?;
                MarginalSpec::LogNormal(num(&args[0])?, num(&args[1])?)
            }
            "uniform" => {
                arity(2, 2)?;
                MarginalSpec::Uniform(num(&args[0])?, num(&args[1])?)
            }
            "weibull" => {
                arity(2, 3)?;
                let loc = args.get(2).map(|a| num(a)).transpose()?.unwrap_or(0.0);
                MarginalSpec::Weibull(num(&args[0])?, num(&args[1])?, loc)
            }
            "empirical" => {
                arity(1, 2)?;
                MarginalSpec::Empirical {
                    path: resolve(&args[0], base_dir),
                    header: header_flag(args.get(1))?,
                }
            }
            "tail_mixture" => {
                arity(3, 4)?;
                MarginalSpec::TailMixture {
                    path: resolve(&args[0], base_dir),
                    split: num(&args[1])?,
                    p1: num(&args[2])?,
                    header: header_flag(args.get(3))?,
                }
            }
            "censored_weibull" => {
                arity(3, 4)?;
                let params = match args[2].as_str() {
                    "2" => WeibullParams::Two,
                    "3" => WeibullParams::Three,
                    other => return Err(Error::invalid(format!("Weibull parameter count {other:?} is not 2 or 3"))),
                };
                MarginalSpec::CensoredWeibull {
                    path: resolve(&args[0], base_dir),
                    lower_fraction: num(&args[1])?,
                    params,
                    header: header_flag(args.get(3))?,
                }
            }
            "mixture" => {
                arity(4, 4)?;
                MarginalSpec::Mixture {
                    lower: Box::new(MarginalSpec::parse(&args[0], base_dir)?),
                    upper: Box::new(MarginalSpec::parse(&args[1], base_dir)?),
                    p1: num(&args[2])?,
                    natural_p: num(&args[3])?,
                }
            }
            other => return Err(Error::invalid(format!("unknown distribution {other:?}"))),
        };
        Ok(spec)
    }

    pub fn build(&self) -> Result<Marginal> {
        match self {
            MarginalSpec::Normal(m, s) => Marginal::normal(*m, *s),
            MarginalSpec::LogNormal(m, s) => Marginal::lognormal(*m, *s),
            MarginalSpec::Uniform(a, b) => Marginal::uniform(*a, *b),
            MarginalSpec::Weibull(k, l, loc) => Marginal::weibull(*k, *l, *loc),
            MarginalSpec::Empirical { path, header } => {
                Marginal::empirical(io::read_single_column(path, *header)?)
            }
            MarginalSpec::TailMixture { path, header, split, p1 } => {
                input_models::build_tail_mixture(&io::read_single_column(path, *header)?, *split, *p1)
            }
            MarginalSpec::CensoredWeibull { path, header, lower_fraction, params } => {
                let data = io::read_single_column(path, *header)?;
                input_models::fit_censored_weibull(&data, *lower_fraction, *params)?.marginal()
            }
            MarginalSpec::Mixture { lower, upper, p1, natural_p } => {
                Marginal::two_stratum(lower.build()?, upper.build()?, *p1, *natural_p)
            }
        }
    }
}

impl fmt::Display for MarginalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = |header: bool| if header { ", header" } else { "" };
        match self {
            MarginalSpec::Normal(m, s) => write!(f, "normal({}, {})", fmt_f64(*m), fmt_f64(*s)),
            MarginalSpec::LogNormal(m, s) => write!(f, "lognormal({}, {})", fmt_f64(*m), fmt_f64(*s)),
            MarginalSpec::Uniform(a, b) => write!(f, "uniform({}, {})", fmt_f64(*a), fmt_f64(*b)),
            MarginalSpec::Weibull(k, l, loc) => {
                write!(f, "weibull({}, {}, {})", fmt_f64(*k), fmt_f64(*l), fmt_f64(*loc))
            }
            MarginalSpec::Empirical { path, header } => {
                write!(f, "empirical({}{})", path.display(), h(*header))
            }
            MarginalSpec::TailMixture { path, header, split, p1 } => write!(
                f,
                "tail_mixture({}, {}, {}{})",
                path.display(),
                fmt_f64(*split),
                fmt_f64(*p1),
                h(*header)
            ),
            MarginalSpec::CensoredWeibull { path, header, lower_fraction, params } => write!(
                f,
                "censored_weibull({}, {}, {}{})",
                path.display(),
                fmt_f64(*lower_fraction),
                if *params == WeibullParams::Two { 2 } else { 3 },
                h(*header)
            ),
            MarginalSpec::Mixture { lower, upper, p1, natural_p } => {
                write!(f, "mixture({lower}, {upper}, {}, {})", fmt_f64(*p1), fmt_f64(*natural_p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Mcmc,
    Map,
}

/// Everything needed to reproduce a run, a repeat study, an oracle run or an
/// ANOVA screening.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub problem: ProblemSpec,
    /// Named marginals in input order; empty means the problem's own model.
    pub inputs: Vec<(String, MarginalSpec)>,
    pub goal: Goal,
    pub direction: Direction,
    pub threshold: f64,
    pub probability: f64,
    pub n0: usize,
    pub n_plus: usize,
    pub design: DesignKind,
    pub mc: McPolicy,
    pub candidates: CandidatePolicy,
    pub acquisition: AcquisitionConfig,
    pub fit: FitKind,
    pub mcmc: McmcConfig,
    pub map_starts: usize,
    pub prior: PsiPrior,
    pub diagnostics: bool,
    pub diagnostics_threshold: f64,
    pub diagnostics_window: usize,
    pub determinism_check: bool,
    pub repeats: usize,
    pub repeat_criteria: Vec<Criterion>,
    pub repeat_designs: Vec<DesignKind>,
    pub truth: Option<f64>,
    pub oracle_n_big: usize,
    pub anova_grid_points: usize,
    pub anova_mc_base: usize,
    /// Size of the Latin hypercube the ANOVA surrogate is fitted to.
    pub anova_design_size: usize,
}

impl Default for Settings {
    /// The short-column probability study: 20 + 20 points, 10⁵ Monte Carlo
    /// points, 10⁴ candidates, discrepancy criterion, uniform initial design.
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Settings {
            seed: 1,
            problem: ProblemSpec::ShortColumn(ShortColumnSpec::default()),
            inputs: Vec::new(),
            goal: Goal::Probability,
            direction: Direction::Lower,
            threshold: 0.0,
            probability: 0.0025,
            n0: exp.n0,
            n_plus: exp.n_plus,
            design: exp.design,
            mc: exp.mc,
            candidates: exp.candidates,
            acquisition: exp.acquisition,
            fit: FitKind::Mcmc,
            mcmc: McmcConfig::default(),
            map_starts: 8,
            prior: PsiPrior::default(),
            diagnostics: true,
            diagnostics_threshold: crate::diagnostics::DEFAULT_THRESHOLD,
            diagnostics_window: crate::diagnostics::DEFAULT_WINDOW,
            determinism_check: true,
            repeats: 10,
            repeat_criteria: vec![Criterion::Discrepancy, Criterion::ExpectedImprovement],
            repeat_designs: vec![DesignKind::Random, DesignKind::UniformLhd],
            truth: Some(0.0025),
            oracle_n_big: 10_000_000,
            anova_grid_points: crate::sensitivity::DEFAULT_GRID_POINTS,
            anova_mc_base: crate::sensitivity::DEFAULT_MC_BASE,
            anova_design_size: 40,
        }
    }
}

pub fn design_name(d: DesignKind) -> &'static str {
    match d {
        DesignKind::Random => "random",
        DesignKind::UniformLhd => "uniform",
    }
}

fn parse_design(s: &str) -> Result<DesignKind> {
    match s {
        "random" => Ok(DesignKind::Random),
        "uniform" => Ok(DesignKind::UniformLhd),
        _ => Err(Error::invalid(format!("design {s:?} is not `random` or `uniform`"))),
    }
}

fn parse_criterion(s: &str) -> Result<Criterion> {
    match s {
        "discrepancy" => Ok(Criterion::Discrepancy),
        "ei" => Ok(Criterion::ExpectedImprovement),
        _ => Err(Error::invalid(format!("criterion {s:?} is not `discrepancy` or `ei`"))),
    }
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(|w| f(w.trim())).collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::invalid(format!("{s:?} is not `true` or `false`"))),
    }
}

fn from_str<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::invalid(format!("cannot parse {s:?}")))
}

/// Raw `key = value` pairs with their line numbers.
fn parse_pairs(text: &str) -> std::result::Result<BTreeMap<String, (usize, String)>, Vec<String>> {
    let mut pairs = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`, got {line:?}", i + 1));
            continue;
        };
        let key = k.trim().to_string();
        if pairs.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
            errors.push(format!("line {}: `{key}` is set twice", i + 1));
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(errors)
    }
}

impl Settings {
    /// Parses settings text; relative data paths resolve against `base_dir`.
    /// All problems are reported together, one per offending key.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut pairs = parse_pairs(text).map_err(Error::Config)?;
        let mut errors: Vec<String> = Vec::new();
        let mut s = Settings::default();

        // Removes `key` and applies `f` to its value, recording failures.
        let mut take = |key: &str, errors: &mut Vec<String>, f: &mut dyn FnMut(&str) -> Result<()>| {
            if let Some((line, v)) = pairs.remove(key) {
                if let Err(e) = f(&v) {
                    errors.push(format!("line {line}: {key}: {}", e.to_string().trim_start_matches("invalid argument: ")));
                }
            }
        };

        take("seed", &mut errors, &mut |v| Ok(s.seed = from_str(v)?));
        let mut problem = String::from("short_column");
        take("problem", &mut errors, &mut |v| Ok(problem = v.to_string()));
        let mut b = 3.0;
        let mut h = 10.0;
        take("problem.b", &mut errors, &mut |v| Ok(b = num(v)?));
        take("problem.h", &mut errors, &mut |v| Ok(h = num(v)?));
        let mut coefficients: Option<Vec<f64>> = None;
        take("problem.coefficients", &mut errors, &mut |v| Ok(coefficients = Some(parse_list(v, num)?)));
        let mut command: Option<String> = None;
        take("problem.command", &mut errors, &mut |v| Ok(command = Some(v.to_string())));
        let mut timeout = ExternalCommand::DEFAULT_TIMEOUT.as_secs_f64();
        take("problem.timeout_secs", &mut errors, &mut |v| Ok(timeout = num(v)?));

        let mut names: Option<Vec<String>> = None;
        take("inputs", &mut errors, &mut |v| {
            Ok(names = Some(v.split(',').map(|w| w.trim().to_string()).collect()))
        });
        if let Some(names) = &names {
            for name in names {
                let key = format!("input.{name}");
                let mut found = false;
                take(&key, &mut errors, &mut |v| {
                    found = true;
                    s.inputs.push((name.clone(), MarginalSpec::parse(v, base_dir)?));
                    Ok(())
                });
                if !found {
                    errors.push(format!("inputs: `{key}` is missing"));
                }
            }
        }

        take("goal", &mut errors, &mut |v| {
            s.goal = match v {
                "probability" => Goal::Probability,
                "quantile" => Goal::Quantile,
                _ => return Err(Error::invalid(format!("{v:?} is not `probability` or `quantile`"))),
            };
            Ok(())
        });
        take("tail.direction", &mut errors, &mut |v| {
            s.direction = match v {
                "upper" => Direction::Upper,
                "lower" => Direction::Lower,
                _ => return Err(Error::invalid(format!("{v:?} is not `upper` or `lower`"))),
            };
            Ok(())
        });
        take("tail.threshold", &mut errors, &mut |v| Ok(s.threshold = num(v)?));
        take("tail.probability", &mut errors, &mut |v| Ok(s.probability = num(v)?));
        take("n0", &mut errors, &mut |v| Ok(s.n0 = from_str(v)?));
        take("n_plus", &mut errors, &mut |v| Ok(s.n_plus = from_str(v)?));
        take("design", &mut errors, &mut |v| Ok(s.design = parse_design(v)?));

        let mut mc_kind = String::from("iid");
        let mut mc_size = 100_000usize;
        let mut per_stratum = 50usize;
        let mut cap = crate::designs::STRATIFIED_CAP;
        take("mc.kind", &mut errors, &mut |v| Ok(mc_kind = v.to_string()));
        take("mc.size", &mut errors, &mut |v| Ok(mc_size = from_str(v)?));
        take("mc.per_stratum", &mut errors, &mut |v| Ok(per_stratum = from_str(v)?));
        take("mc.cap", &mut errors, &mut |v| Ok(cap = from_str(v)?));
        match mc_kind.as_str() {
            "iid" => s.mc = McPolicy::Iid { size: mc_size },
            "stratified" => s.mc = McPolicy::Stratified { per_stratum, cap },
            other => errors.push(format!("mc.kind: {other:?} is not `iid` or `stratified`")),
        }
        let mut cand_kind = String::from("fresh");
        let mut cand_size = 10_000usize;
        take("candidates", &mut errors, &mut |v| Ok(cand_kind = v.to_string()));
        take("candidates.size", &mut errors, &mut |v| Ok(cand_size = from_str(v)?));
        match cand_kind.as_str() {
            "fresh" => s.candidates = CandidatePolicy::Fresh { size: cand_size },
            "mc" => s.candidates = CandidatePolicy::McSet,
            other => errors.push(format!("candidates: {other:?} is not `fresh` or `mc`")),
        }

        take("acquisition.criterion", &mut errors, &mut |v| Ok(s.acquisition.criterion = parse_criterion(v)?));
        take("acquisition.alpha", &mut errors, &mut |v| Ok(s.acquisition.alpha = num(v)?));
        take("acquisition.epsilon", &mut errors, &mut |v| Ok(s.acquisition.epsilon = num(v)?));
        take("fit.method", &mut errors, &mut |v| {
            s.fit = match v {
                "mcmc" => FitKind::Mcmc,
                "map" => FitKind::Map,
                _ => return Err(Error::invalid(format!("{v:?} is not `mcmc` or `map`"))),
            };
            Ok(())
        });
        take("mcmc.burn_in", &mut errors, &mut |v| Ok(s.mcmc.burn_in = from_str(v)?));
        take("mcmc.thin", &mut errors, &mut |v| Ok(s.mcmc.thin = from_str(v)?));
        take("mcmc.draws", &mut errors, &mut |v| Ok(s.mcmc.draws = from_str(v)?));
        take("mcmc.step_size", &mut errors, &mut |v| Ok(s.mcmc.step_size = num(v)?));
        take("mcmc.target_acceptance", &mut errors, &mut |v| Ok(s.mcmc.target_acceptance = num(v)?));
        take("map.starts", &mut errors, &mut |v| Ok(s.map_starts = from_str(v)?));
        let (mut lo, mut hi) = PsiPrior::default().log_theta_bounds();
        take("prior.log_theta_min", &mut errors, &mut |v| Ok(lo = num(v)?));
        take("prior.log_theta_max", &mut errors, &mut |v| Ok(hi = num(v)?));
        match PsiPrior::new(lo, hi) {
            Ok(p) => s.prior = p,
            Err(e) => errors.push(format!("prior: {e}")),
        }

        take("diagnostics.enabled", &mut errors, &mut |v| Ok(s.diagnostics = parse_bool(v)?));
        take("diagnostics.threshold", &mut errors, &mut |v| Ok(s.diagnostics_threshold = num(v)?));
        take("diagnostics.window", &mut errors, &mut |v| Ok(s.diagnostics_window = from_str(v)?));
        take("determinism_check", &mut errors, &mut |v| Ok(s.determinism_check = parse_bool(v)?));
        take("repeat.count", &mut errors, &mut |v| Ok(s.repeats = from_str(v)?));
        take("repeat.criteria", &mut errors, &mut |v| Ok(s.repeat_criteria = parse_list(v, parse_criterion)?));
        take("repeat.designs", &mut errors, &mut |v| Ok(s.repeat_designs = parse_list(v, parse_design)?));
        take("repeat.truth", &mut errors, &mut |v| {
            s.truth = if v == "none" { None } else { Some(num(v)?) };
            Ok(())
        });
        take("oracle.n_big", &mut errors, &mut |v| Ok(s.oracle_n_big = from_str(v)?));
        take("anova.grid_points", &mut errors, &mut |v| Ok(s.anova_grid_points = from_str(v)?));
        take("anova.mc_base", &mut errors, &mut |v| Ok(s.anova_mc_base = from_str(v)?));
        take("anova.design_size", &mut errors, &mut |v| Ok(s.anova_design_size = from_str(v)?));

        for (key, (line, _)) in &pairs {
            errors.push(format!("line {line}: unknown key `{key}`"));
        }

        let dim = if s.inputs.is_empty() { None } else { Some(s.inputs.len()) };
        match problem.as_str() {
            "short_column" => match ShortColumnSpec::new(b, h) {
                Ok(spec) => s.problem = ProblemSpec::ShortColumn(spec),
                Err(e) => errors.push(format!("problem: {e}")),
            },
            "linear" => match coefficients {
                Some(c) => s.problem = ProblemSpec::Linear(c),
                None => errors.push("problem.coefficients is required for the linear problem".into()),
            },
            other => {
                let command = other.strip_prefix("external:").map(str::to_string).or(command.filter(|_| other == "external"));
                match (command, dim) {
                    (Some(c), Some(d)) => match ExternalCommand::parse(&c, d) {
                        Ok(mut cmd) => {
                            cmd.timeout = Duration::from_secs_f64(timeout.max(0.0));
                            s.problem = ProblemSpec::External(cmd);
                        }
                        Err(e) => errors.push(format!("problem: {e}")),
                    },
                    (None, _) => errors.push(format!("problem: unknown problem {other:?}")),
                    (_, None) => errors.push("problem: an external black box needs `inputs`".into()),
                }
            }
        }
        errors.extend(s.problems());
        if errors.is_empty() {
            Ok(s)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Settings::parse(&text, dir)
    }

    /// Cross-field checks beyond single-value parsing.
    fn problems(&self) -> Vec<String> {
        let mut out = self.experiment(0).problems();
        let dim = self.black_box_dim();
        if !self.inputs.is_empty() && self.inputs.len() != dim {
            out.push(format!("inputs: {} marginals for a {dim}-input problem", self.inputs.len()));
        }
        if self.repeats == 0 {
            out.push("repeat.count must be positive".into());
        }
        if self.repeat_criteria.is_empty() || self.repeat_designs.is_empty() {
            out.push("repeat.criteria and repeat.designs must be nonempty".into());
        }
        if self.oracle_n_big == 0 {
            out.push("oracle.n_big must be positive".into());
        }
        if self.anova_grid_points < 2 || self.anova_mc_base < 2 || self.anova_design_size < 2 {
            out.push("anova.grid_points, anova.mc_base and anova.design_size must be at least 2".into());
        }
        if self.diagnostics_window == 0 {
            out.push("diagnostics.window must be positive".into());
        }
        out
    }

    fn black_box_dim(&self) -> usize {
        match &self.problem {
            ProblemSpec::ShortColumn(_) => 3,
            ProblemSpec::Linear(c) => c.len(),
            ProblemSpec::External(cmd) => cmd.dim,
        }
    }

    pub fn tail(&self) -> TailSpec {
        TailSpec {
            direction: self.direction,
            target: match self.goal {
                Goal::Probability => TailTarget::Threshold(self.threshold),
                Goal::Quantile => TailTarget::Probability(self.probability),
            },
        }
    }

    pub fn fit_method(&self) -> FitMethod {
        match self.fit {
            FitKind::Mcmc => FitMethod::Mcmc(self.mcmc.clone()),
            FitKind::Map => FitMethod::Map { starts: self.map_starts },
        }
    }

    /// The run configuration with all seeds derived from `root`.
    pub fn experiment(&self, root: u64) -> ExperimentConfig {
        ExperimentConfig {
            n0: self.n0,
            n_plus: self.n_plus,
            tail: self.tail(),
            acquisition: self.acquisition,
            design: self.design,
            mc: self.mc,
            candidates: self.candidates,
            fit: self.fit_method(),
            prior: self.prior,
            seeds: RunSeeds::from_root(root),
            determinism_check: self.determinism_check,
            diagnostics: self.diagnostics,
        }
    }

    pub fn black_box(&self) -> BlackBox {
        match &self.problem {
            ProblemSpec::ShortColumn(spec) => problems::short_column_box(*spec),
            ProblemSpec::Linear(c) => problems::linear_box(c.clone()),
            ProblemSpec::External(cmd) => BlackBox::External(cmd.clone()),
        }
    }

    pub fn input_model(&self) -> Result<InputModel> {
        if self.inputs.is_empty() {
            return match &self.problem {
                ProblemSpec::ShortColumn(_) => Ok(problems::short_column_model()),
                _ => Err(Error::Config(vec!["inputs: this problem needs explicit input distributions".into()])),
            };
        }
        let marginals = self.inputs.iter().map(|(_, m)| m.build()).collect::<Result<Vec<_>>>()?;
        InputModel::with_names(marginals, self.inputs.iter().map(|(n, _)| n.clone()).collect())
    }

    /// Canonical listing of every key.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        let mut kv = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        kv("seed", self.seed.to_string());
        match &self.problem {
            ProblemSpec::ShortColumn(spec) => {
                kv("problem", "short_column".into());
                kv("problem.b", fmt_f64(spec.b));
                kv("problem.h", fmt_f64(spec.h));
            }
            ProblemSpec::Linear(c) => {
                kv("problem", "linear".into());
                kv("problem.coefficients", c.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", "));
            }
            ProblemSpec::External(cmd) => {
                kv("problem", "external".into());
                let mut words = vec![cmd.program.clone()];
                words.extend(cmd.args.iter().cloned());
                kv("problem.command", words.join(" "));
                kv("problem.timeout_secs", fmt_f64(cmd.timeout.as_secs_f64()));
            }
        }
        if !self.inputs.is_empty() {
            kv("inputs", self.inputs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", "));
            for (name, spec) in &self.inputs {
                kv(&format!("input.{name}"), spec.to_string());
            }
        }
        kv("goal", self.goal.name().into());
        kv("tail.direction", self.direction.name().into());
        kv("tail.threshold", fmt_f64(self.threshold));
        kv("tail.probability", fmt_f64(self.probability));
        kv("n0", self.n0.to_string());
        kv("n_plus", self.n_plus.to_string());
        kv("design", design_name(self.design).into());
        match self.mc {
            McPolicy::Iid { size } => {
                kv("mc.kind", "iid".into());
                kv("mc.size", size.to_string());
            }
            McPolicy::Stratified { per_stratum, cap } => {
                kv("mc.kind", "stratified".into());
                kv("mc.per_stratum", per_stratum.to_string());
                kv("mc.cap", cap.to_string());
            }
        }
        match self.candidates {
            CandidatePolicy::Fresh { size } => {
                kv("candidates", "fresh".into());
                kv("candidates.size", size.to_string());
            }
            CandidatePolicy::McSet => kv("candidates", "mc".into()),
        }
        kv("acquisition.criterion", self.acquisition.criterion.name().into());
        kv("acquisition.alpha", fmt_f64(self.acquisition.alpha));
        kv("acquisition.epsilon", fmt_f64(self.acquisition.epsilon));
        kv("fit.method", if self.fit == FitKind::Mcmc { "mcmc" } else { "map" }.into());
        kv("mcmc.burn_in", self.mcmc.burn_in.to_string());
        kv("mcmc.thin", self.mcmc.thin.to_string());
        kv("mcmc.draws", self.mcmc.draws.to_string());
        kv("mcmc.step_size", fmt_f64(self.mcmc.step_size));
        kv("mcmc.target_acceptance", fmt_f64(self.mcmc.target_acceptance));
        kv("map.starts", self.map_starts.to_string());
        let (lo, hi) = self.prior.log_theta_bounds();
        kv("prior.log_theta_min", fmt_f64(lo));
        kv("prior.log_theta_max", fmt_f64(hi));
        kv("diagnostics.enabled", self.diagnostics.to_string());
        kv("diagnostics.threshold", fmt_f64(self.diagnostics_threshold));
        kv("diagnostics.window", self.diagnostics_window.to_string());
        kv("determinism_check", self.determinism_check.to_string());
        kv("repeat.count", self.repeats.to_string());
        kv("repeat.criteria", self.repeat_criteria.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "));
        kv("repeat.designs", self.repeat_designs.iter().map(|d| design_name(*d)).collect::<Vec<_>>().join(", "));
        kv("repeat.truth", self.truth.map_or("none".into(), fmt_f64));
        kv("oracle.n_big", self.oracle_n_big.to_string());
        kv("anova.grid_points", self.anova_grid_points.to_string());
        kv("anova.mc_base", self.anova_mc_base.to_string());
        kv("anova.design_size", self.anova_design_size.to_string());
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// One-line description of each key, in listing order.
const KEY_DOCS: &[(&str, &str)] = &[
    ("seed", "root seed; every random stream is derived from it"),
    ("problem", "short_column | linear | external (or external:<command line>)"),
    ("problem.b", "short column: cross-section width"),
    ("problem.h", "short column: cross-section depth"),
    ("problem.coefficients", "linear: comma-separated coefficients of y = sum c_j x_j"),
    ("problem.command", "external: program and arguments; one evaluation per call, inputs on stdin"),
    ("problem.timeout_secs", "external: seconds before an evaluation is killed"),
    ("inputs", "comma-separated input names; each needs an input.<name> line"),
    ("goal", "probability | quantile"),
    ("tail.direction", "lower | upper"),
    ("tail.threshold", "probability goal: the level y_f"),
    ("tail.probability", "quantile goal: the tail probability"),
    ("n0", "initial design size"),
    ("n_plus", "loop iterations; n_plus - 1 points are added"),
    ("design", "uniform (Latin hypercube over mean +- 3 sd) | random (input distribution)"),
    ("mc.kind", "iid | stratified (two-stratum mixtures in every input)"),
    ("mc.size", "iid: Monte Carlo set size"),
    ("mc.per_stratum", "stratified: points per stratum"),
    ("mc.cap", "stratified: largest allowed set"),
    ("candidates", "fresh (new sample from the inputs) | mc (the Monte Carlo set)"),
    ("candidates.size", "fresh: candidate set size"),
    ("acquisition.criterion", "discrepancy | ei"),
    ("acquisition.alpha", "ei: half-width multiplier of the improvement band"),
    ("acquisition.epsilon", "discrepancy: smoothing added to the squared gap"),
    ("fit.method", "mcmc (Bayesian mixture) | map (single posterior mode)"),
    ("mcmc.burn_in", "sweeps discarded while step sizes adapt"),
    ("mcmc.thin", "sweeps between kept draws"),
    ("mcmc.draws", "kept draws M"),
    ("mcmc.step_size", "initial random-walk step on the transformed scale"),
    ("mcmc.target_acceptance", "acceptance rate targeted during burn-in"),
    ("map.starts", "map: optimizer starting points"),
    ("prior.log_theta_min", "lower bound of the uniform prior on log range parameters"),
    ("prior.log_theta_max", "upper bound of the uniform prior on log range parameters"),
    ("diagnostics.enabled", "record the per-iteration discrepancy diagnostic"),
    ("diagnostics.threshold", "median diagnostic below this counts as converged"),
    ("diagnostics.window", "consecutive iterations below the threshold"),
    ("determinism_check", "re-evaluate one training point after the run"),
    ("repeat.count", "repeat study: number of repeats"),
    ("repeat.criteria", "repeat study: criteria compared"),
    ("repeat.designs", "repeat study: initial designs compared"),
    ("repeat.truth", "repeat study: true value for RMSE, or none"),
    ("oracle.n_big", "oracle: brute-force sample size"),
    ("anova.grid_points", "anova: grid points per input"),
    ("anova.mc_base", "anova: base sample size for averaging"),
    ("anova.design_size", "anova: simulator runs behind the screening surrogate"),
];

/// The default listing with a comment above every key, followed by the
/// keys that only apply to other choices, commented out.
pub fn documented_defaults() -> String {
    let doc = |key: &str| KEY_DOCS.iter().find(|(k, _)| *k == key).map_or("", |(_, d)| d);
    let defaults = Settings::default().to_text();
    let mut out = String::from("# raretail settings; every key below shows its default.\n");
    let mut listed = Vec::new();
    for line in defaults.lines() {
        let key = line.split('=').next().unwrap_or("").trim();
        listed.push(key.to_string());
        out.push_str(&format!("\n# {}\n{line}\n", doc(key)));
    }
    out.push_str("\n# Keys for other choices, with example values:\n");
    let examples = [
        ("problem.coefficients", "1, -2, 0.5"),
        ("problem.command", "python3 sim.py"),
        ("problem.timeout_secs", "300.0"),
        ("inputs", "load, strength"),
        ("mc.size", "100000"),
        ("mc.per_stratum", "50"),
        ("mc.cap", "1000000"),
        ("candidates.size", "10000"),
    ];
    for (key, value) in examples {
        if !listed.iter().any(|k| k == key) {
            out.push_str(&format!("\n# {}\n# {key} = {value}\n", doc(key)));
        }
    }
    out.push_str(
        "\n# input.<name> distributions: normal(mean, sd), lognormal(log_mean, log_sd),\n\
         # uniform(lo, hi), weibull(shape, scale[, location]), empirical(file[, header]),\n\
         # tail_mixture(file, split, p1[, header]), censored_weibull(file, fraction, 2|3[, header]),\n\
         # mixture(lower_spec, upper_spec, p1, natural_p)\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn here() -> &'static Path {
        Path::new("/data")
    }

    #[test]
    fn defaults_round_trip() {
        let s = Settings::default();
        assert_eq!(Settings::parse(&s.to_text(), here()).unwrap(), s);
        assert_eq!(Settings::parse("", here()).unwrap(), s);
    }

    #[test]
    fn full_listing_round_trips() {
        let text = "\
# stratified screening of an external simulator
seed = 99
problem = external:./floor --fast
problem.timeout_secs = 12.5
inputs = a, b
input.a = mixture(uniform(0, 0.1), uniform(0.1, 1), 0.5, 0.1)
input.b = tail_mixture(moe.csv, 0.1, 0.5, header)
goal = quantile
tail.direction = upper
tail.probability = 0.001
mc.kind = stratified
mc.per_stratum = 50
candidates = mc
acquisition.criterion = ei
fit.method = map
repeat.truth = none
";
        let s = Settings::parse(text, here()).unwrap();
        assert_eq!(s.seed, 99);
        let ProblemSpec::External(cmd) = &s.problem else { panic!() };
        assert_eq!((cmd.program.as_str(), cmd.args.clone(), cmd.dim), ("./floor", vec!["--fast".to_string()], 2));
        assert_eq!(cmd.timeout, Duration::from_secs_f64(12.5));
        assert_eq!(
            s.inputs[1].1,
            MarginalSpec::TailMixture { path: "/data/moe.csv".into(), header: true, split: 0.1, p1: 0.5 }
        );
        assert_eq!(s.candidates, CandidatePolicy::McSet);
        assert_eq!(s.truth, None);
        assert_eq!(Settings::parse(&s.to_text(), Path::new("/elsewhere")).unwrap(), s);
    }

    #[test]
    fn every_bad_field_is_reported() {
        let text = "n0 = 1\nmcmc.draws = 0\nacquisition.alpha = -1\nbogus = 3\ngoal = maybe\nseed = x\nnot a pair\n";
        let Err(Error::Config(errors)) = Settings::parse(text, here()) else { panic!() };
        assert!(errors.iter().any(|e| e.contains("not a pair")), "{errors:?}");
        let Err(Error::Config(errors)) = Settings::parse(&text.replace("not a pair\n", ""), here()) else { panic!() };
        for needle in ["n0", "mcmc.draws", "alpha", "bogus", "goal", "seed"] {
            assert!(errors.iter().any(|e| e.contains(needle)), "{needle} missing from {errors:?}");
        }
    }

    #[test]
    fn marginal_specs() {
        let m = MarginalSpec::parse("weibull(2, 1)", here()).unwrap();
        assert_eq!(m, MarginalSpec::Weibull(2.0, 1.0, 0.0));
        assert!(MarginalSpec::parse("normal(1)", here()).is_err());
        assert!(MarginalSpec::parse("cauchy(0, 1)", here()).is_err());
        assert!(MarginalSpec::parse("normal 0 1", here()).is_err());
        let nested = MarginalSpec::parse("mixture(normal(0, 1), lognormal(1, 0.5), 0.3, 0.2)", here()).unwrap();
        assert_eq!(MarginalSpec::parse(&nested.to_string(), here()).unwrap(), nested);
        assert!(nested.build().is_ok());
    }

    #[test]
    fn documented_defaults_parse_to_defaults() {
        let text = documented_defaults();
        assert_eq!(Settings::parse(&text, here()).unwrap(), Settings::default());
        for line in Settings::default().to_text().lines() {
            let key = line.split('=').next().unwrap().trim();
            assert!(KEY_DOCS.iter().any(|(k, _)| *k == key), "{key} undocumented");
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(Settings::parse("n0 = 5\nn0 = 6\n", here()).is_err());
    }
}

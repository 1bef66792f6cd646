//! `raretail`: sequential GP estimation of extreme tail probabilities and
//! quantiles from the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use raretail::config::{design_name, documented_defaults, Settings};
use raretail::diagnostics::convergence_flag;
use raretail::io::{diagnostics_csv, fmt_f64, trace_csv, write_atomic};
use raretail::problems::brute_force_truth;
use raretail::sensitivity::{anova_decompose, fit_screening_surrogate, main_effect_curve, ScaledSurrogate};
use raretail::sequential::{self, RunSeeds};
use raretail::study;
use raretail::Error;

const MANIFEST: &str = "manifest.txt";

#[derive(Parser)]
#[command(name = "raretail", version, about = "Sequential GP estimation of extreme tail probabilities and quantiles")]
struct Cli {
    /// Print every setting with its default and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args)]
struct Common {
    /// Settings file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the settings file.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// One sequential run: trace, diagnostics and manifest.
    Run(Common),
    /// Repeated runs over criteria and initial designs, with an RMSE table.
    Repeat {
        #[command(flatten)]
        common: Common,
        /// Number of repeats, overriding the settings file.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Brute-force Monte Carlo truth for the configured tail quantity.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Sample size, overriding the settings file.
        #[arg(long)]
        n_big: Option<usize>,
    },
    /// Functional-ANOVA screening of a surrogate fitted to a Latin hypercube.
    Anova(Common),
    /// Re-run a saved run with diagnostics and report convergence.
    Diagnose {
        /// Output directory of an earlier `run`.
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err.root_cause() {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Size { .. } => 2,
        Error::Evaluation(_) => 3,
        Error::IllConditioned { .. } | Error::Selection(_) | Error::FitFailure { .. } => 4,
        _ => 1,
    }
}

fn load_settings(common: &Common) -> Result<Settings, Error> {
    let mut settings = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    Ok(settings)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Settings text preceded by comment lines naming the command, version,
/// creation time, derived seeds and output files. Parsing it ignores the
/// comments, so the manifest doubles as a settings file.
fn manifest(command: &str, settings: &Settings, outputs: &[&str]) -> String {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let seeds = RunSeeds::from_root(settings.seed);
    let mut out = String::new();
    let _ = writeln!(out, "# raretail {} manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {command}");
    let _ = writeln!(out, "# created: {created} (seconds since the Unix epoch)");
    let _ = writeln!(
        out,
        "# seeds: design {} mc {} candidate {} chain {} recheck {}",
        seeds.design, seeds.mc, seeds.candidate, seeds.chain, seeds.recheck
    );
    let _ = writeln!(out, "# outputs: {}", outputs.join(", "));
    out.push_str(&settings.to_text());
    out
}

fn cmd_run(settings: &Settings, out_dir: &Path, jobs: usize) -> Result<(), Error> {
    let model = settings.input_model()?;
    let black_box = settings.black_box();
    let cfg = settings.experiment(settings.seed);
    let outcome = thread_pool(jobs)?.install(|| sequential::run(&cfg, &model, &black_box, settings.goal));
    // An aborted run still leaves its partial trace behind.
    let partial = match &outcome {
        Ok((_, trace)) => Some(trace),
        Err(Error::RunAborted { trace, .. }) => Some(&**trace),
        Err(_) => None,
    };
    if let Some(trace) = partial {
        let criterion = settings.acquisition.criterion.name();
        write_atomic(&out_dir.join("trace.csv"), &trace_csv(&[(0, criterion, trace)], model.names()))?;
        let mut outputs = vec!["trace.csv"];
        if settings.diagnostics {
            let rows: Vec<_> = trace.diagnostics().into_iter().enumerate().map(|(i, s)| (i + 1, s)).collect();
            write_atomic(&out_dir.join("diagnostics.csv"), &diagnostics_csv(&rows))?;
            outputs.push("diagnostics.csv");
        }
        write_atomic(&out_dir.join(MANIFEST), &manifest("run", settings, &outputs))?;
        for w in &trace.warnings {
            eprintln!("warning: {w}");
        }
    }
    let (estimate, trace) = outcome?;
    println!(
        "{} estimate {} after {} evaluations",
        settings.goal.name(),
        fmt_f64(estimate),
        trace.evaluations
    );
    Ok(())
}

fn cmd_repeat(settings: &Settings, out_dir: &Path, jobs: usize) -> Result<(), Error> {
    let model = settings.input_model()?;
    let result = study::run_study(settings, &model, &settings.black_box(), jobs)?;
    let mut outputs = vec!["results.csv".to_string()];
    write_atomic(&out_dir.join("results.csv"), &result.results_csv())?;
    if let Some(table) = result.rmse_csv() {
        write_atomic(&out_dir.join("rmse.csv"), &table)?;
        outputs.push("rmse.csv".into());
        print!("RMSE of the final estimate\n{table}");
    }
    for &design in &result.designs {
        for &criterion in &result.criteria {
            let traces: Vec<_> = result
                .cell(design, criterion)
                .filter_map(|run| run.trace().map(|t| (run.repeat, criterion.name(), t)))
                .collect();
            let name = format!("trace-{}-{}.csv", design_name(design), criterion.name());
            write_atomic(&out_dir.join(&name), &trace_csv(&traces, model.names()))?;
            outputs.push(name);
        }
    }
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_atomic(&out_dir.join(MANIFEST), &manifest("repeat", settings, &names))?;
    let failed = result.n_failed();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed; see results.csv", result.runs.len());
    }
    Ok(())
}

fn cmd_oracle(settings: &Settings, out_dir: &Path, jobs: usize) -> Result<(), Error> {
    let model = settings.input_model()?;
    let black_box = settings.black_box();
    let tail = settings.tail();
    let truth = thread_pool(jobs)?.install(|| {
        brute_force_truth(&black_box, &model, &tail, settings.oracle_n_big, settings.seed)
    })?;
    let csv = format!(
        "goal,direction,value,std_error,n\n{},{},{},{},{}\n",
        settings.goal.name(),
        settings.direction.name(),
        fmt_f64(truth.value),
        fmt_f64(truth.std_error),
        truth.n
    );
    write_atomic(&out_dir.join("oracle.csv"), &csv)?;
    write_atomic(&out_dir.join(MANIFEST), &manifest("oracle", settings, &["oracle.csv"]))?;
    println!(
        "{} {} (standard error {}, {} samples)",
        settings.goal.name(),
        fmt_f64(truth.value),
        fmt_f64(truth.std_error),
        truth.n
    );
    Ok(())
}

fn cmd_anova(settings: &Settings, out_dir: &Path, jobs: usize) -> Result<(), Error> {
    let model = settings.input_model()?;
    let black_box = settings.black_box();
    let pool = thread_pool(jobs)?;
    let (report, curves) = pool.install(|| -> Result<_, Error> {
        let (surrogate, region) = fit_screening_surrogate(
            &model,
            &black_box,
            settings.anova_design_size,
            &settings.fit_method(),
            &settings.prior,
            settings.seed,
        )?;
        let emulator = ScaledSurrogate { surrogate: &surrogate, region: &region };
        let report =
            anova_decompose(&emulator, &model, settings.anova_grid_points, settings.anova_mc_base, settings.seed)?;
        let curves = (0..model.dim())
            .map(|j| {
                main_effect_curve(&emulator, &model, j, settings.anova_grid_points, settings.anova_mc_base, settings.seed)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok((report, curves))
    })?;

    let mut effects = String::from("effect,percent\n");
    for (name, pct) in report.names.iter().zip(&report.main_pct) {
        let _ = writeln!(effects, "{name},{}", fmt_f64(*pct));
    }
    for ((j, k), pct) in &report.pair_pct {
        let _ = writeln!(effects, "{}:{},{}", report.names[*j], report.names[*k], fmt_f64(*pct));
    }
    let _ = writeln!(effects, "total,{}", fmt_f64(report.total_explained));
    write_atomic(&out_dir.join("anova.csv"), &effects)?;

    let mut curve_csv = String::from("input,x,effect,lower,upper\n");
    for (name, curve) in report.names.iter().zip(&curves) {
        for p in curve {
            let _ = writeln!(
                curve_csv,
                "{name},{},{},{},{}",
                fmt_f64(p.x),
                fmt_f64(p.effect),
                fmt_f64(p.lower),
                fmt_f64(p.upper)
            );
        }
    }
    write_atomic(&out_dir.join("main_effects.csv"), &curve_csv)?;
    write_atomic(&out_dir.join(MANIFEST), &manifest("anova", settings, &["anova.csv", "main_effects.csv"]))?;
    print!("{effects}");
    Ok(())
}

fn cmd_diagnose(dir: &Path, jobs: usize) -> Result<(), Error> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::Config(vec![format!(
            "{} holds no {MANIFEST}; point diagnose at the output directory of `raretail run`",
            dir.display()
        )]));
    }
    let text = std::fs::read_to_string(&path)?;
    if !text.lines().any(|l| l.trim() == "# command: run") {
        return Err(Error::Config(vec![format!("{} was not written by `raretail run`", path.display())]));
    }
    let mut settings = Settings::parse(&text, dir)?;
    settings.diagnostics = true;
    let model = settings.input_model()?;
    let cfg = settings.experiment(settings.seed);
    let (_, trace) =
        thread_pool(jobs)?.install(|| sequential::run(&cfg, &model, &settings.black_box(), settings.goal))?;
    let summaries = trace.diagnostics();
    let rows: Vec<_> = summaries.iter().copied().enumerate().map(|(i, s)| (i + 1, s)).collect();
    write_atomic(&dir.join("diagnostics.csv"), &diagnostics_csv(&rows))?;
    let flag = convergence_flag(&summaries, settings.diagnostics_threshold, settings.diagnostics_window);
    if let Some(last) = summaries.last() {
        println!("final median diagnostic {}", fmt_f64(last.median));
    }
    println!("converged: {}", flag.converged);
    if let Some(note) = flag.note {
        println!("note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{}", documented_defaults());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (run, repeat, oracle, anova, diagnose); see --help");
        return ExitCode::from(2);
    };
    let result = match &command {
        Command::Run(common) => load_settings(common).and_then(|s| cmd_run(&s, &common.out_dir, common.jobs)),
        Command::Repeat { common, repeats } => load_settings(common).and_then(|mut s| {
            if let Some(r) = repeats {
                s.repeats = *r;
            }
            cmd_repeat(&s, &common.out_dir, common.jobs)
        }),
        Command::Oracle { common, n_big } => load_settings(common).and_then(|mut s| {
            if let Some(n) = n_big {
                s.oracle_n_big = *n;
            }
            cmd_oracle(&s, &common.out_dir, common.jobs)
        }),
        Command::Anova(common) => load_settings(common).and_then(|s| cmd_anova(&s, &common.out_dir, common.jobs)),
        Command::Diagnose { dir, jobs } => cmd_diagnose(dir, *jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

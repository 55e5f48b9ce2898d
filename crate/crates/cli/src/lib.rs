//! Command-line front end for `gsexp`.

pub mod problem_file;
pub mod report;
pub mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use gsexp::classify::{classify, singular_set, ClassifyError, ClassifyOptions, ProblemSpec, Verdict};
use gsexp::mc::{render_text, simulate_z, spec_hash, test_samples, MartingaleTest, SimConfig, TestOutcome};
use serde_json::{json, Value};

use problem_file::{load_problem_file, ProblemFile, ValidationError};
use report::{canonical, finite_or_string};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNDECIDABLE: i32 = 2;
pub const EXIT_CONTRADICTION: i32 = 3;
pub const EXIT_SELFTEST_FAILED: i32 = 4;

pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RADIUS: f64 = 1e6;

#[derive(Parser, Debug)]
#[command(
    name = "gsexp",
    version,
    about = "Classify generalized stochastic exponentials of 1-d diffusions and check them by simulation"
)]
pub struct Cli {
    /// Relative tolerance of the quadratures.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Margin of the integrability classifier.
    #[arg(long = "eps-cls", global = true, default_value_t = 0.05)]
    pub eps_cls: f64,
    /// Write a JSON report here.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Martingale classification with its certificate.
    Classify { file: PathBuf },
    /// Monte Carlo estimates of E[Z_t] and the martingale test.
    Simulate(SimulateArgs),
    /// Run the built-in corpus.
    Selftest {
        /// Load `*.json` cases from this directory instead.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PATHS)]
        paths: usize,
    },
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated evaluation times; the test uses the last one.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Truncation radius for infinite endpoints.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Compare the test outcome with the classifier verdict.
    #[arg(long)]
    pub check: bool,
}

/// Output sinks, so tests can capture what a run prints.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, io),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                io.err.write_all(text.as_bytes())
            } else {
                io.out.write_all(text.as_bytes())
            };
            code
        }
    }
}

pub fn run(cli: &Cli, io: &mut Io) -> i32 {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        let _ = writeln!(io.err, "error: --tol must lie in (0, 1), got {}", cli.tol);
        return EXIT_ERROR;
    }
    if !(cli.eps_cls > 0.0 && cli.eps_cls < 0.5) {
        let _ = writeln!(io.err, "error: --eps-cls must lie in (0, 0.5), got {}", cli.eps_cls);
        return EXIT_ERROR;
    }
    let opts = ClassifyOptions {
        tol: cli.tol,
        eps_cls: cli.eps_cls,
        ..Default::default()
    };
    let started = Instant::now();
    let (code, mut report) = match &cli.command {
        Command::Classify { file } => cmd_classify(file, &opts, cli.quiet, io),
        Command::Simulate(args) => cmd_simulate(args, &opts, cli.quiet, io),
        Command::Selftest { corpus, paths } => selftest::cmd_selftest(corpus.as_deref(), *paths, &opts, cli.quiet, io),
    };
    if let Some(path) = &cli.report {
        report["tool"] = json!({"name": "gsexp", "version": env!("CARGO_PKG_VERSION")});
        report["options"] = json!({"tol": cli.tol, "eps_cls": cli.eps_cls});
        report["wall_time_seconds"] = json!(started.elapsed().as_secs_f64());
        if let Err(e) = std::fs::write(path, canonical(&report)) {
            let _ = writeln!(io.err, "error: cannot write report {}: {e}", path.display());
            return EXIT_ERROR;
        }
    }
    code
}

fn validation_failure(e: &ValidationError, report: Value, io: &mut Io) -> (i32, Value) {
    let _ = writeln!(io.err, "{e}");
    let issues: Vec<Value> = e
        .issues
        .iter()
        .map(|i| json!({"field": i.field, "message": i.message}))
        .collect();
    let mut report = report;
    report["error"] = json!({"kind": if e.undecidable { "undecidable" } else { "validation" }, "issues": issues});
    (if e.undecidable { EXIT_UNDECIDABLE } else { EXIT_ERROR }, report)
}

fn load_and_build(
    file: &Path,
    opts: &ClassifyOptions,
    report: &mut Value,
) -> Result<(ProblemFile, ProblemSpec), ValidationError> {
    let pf = load_problem_file(file)?;
    report["problem"] = pf.problem_json();
    let spec = pf.build(opts)?;
    report["spec_hash"] = json!(spec_hash(&spec));
    Ok((pf, spec))
}

/// `{"status": "verdict", ...}` or the reason there is none.
pub fn classification_json(r: &Result<Verdict, ClassifyError>) -> Value {
    match r {
        Ok(v) => {
            let mut j = v.to_json();
            j["status"] = json!("verdict");
            j["singular_set"] = json!(v.singular_set.points);
            j["effective_interval"] = json!({
                "alpha": serde_json::to_value(v.alpha).unwrap_or(Value::Null),
                "beta": serde_json::to_value(v.beta).unwrap_or(Value::Null),
            });
            if let Some(ends) = &v.endpoints {
                j["endpoints"] = serde_json::to_value(ends).unwrap_or(Value::Null);
            }
            j
        }
        Err(ClassifyError::Undecidable { condition, point }) => json!({
            "status": "undecidable",
            "condition": condition,
            "point": problem_file::endpoint_json(*point),
        }),
        Err(e) => json!({"status": "error", "message": e.to_string()}),
    }
}

pub fn cmd_classify(file: &Path, opts: &ClassifyOptions, quiet: bool, io: &mut Io) -> (i32, Value) {
    let mut report = json!({"command": "classify"});
    let spec = match load_and_build(file, opts, &mut report) {
        Ok((_, s)) => s,
        Err(e) => return validation_failure(&e, report, io),
    };
    let result = classify(&spec, opts);
    report["classification"] = classification_json(&result);
    match &result {
        Ok(v) => {
            if !quiet {
                let _ = write!(io.out, "{}", summary(v));
            }
            (EXIT_OK, report)
        }
        Err(e @ ClassifyError::Undecidable { .. }) => {
            if !quiet {
                let _ = writeln!(io.out, "verdict: undecidable");
            }
            let _ = writeln!(io.err, "{e}");
            (EXIT_UNDECIDABLE, report)
        }
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            (EXIT_ERROR, report)
        }
    }
}

fn fmt_points(p: &[f64]) -> String {
    let inner: Vec<String> = p.iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Human-readable certificate.
pub fn summary(v: &Verdict) -> String {
    let mut s = format!("verdict: {}\n", v.level);
    s.push_str(&format!("singular set: {}\n", fmt_points(&v.singular_set.points)));
    s.push_str(&format!(
        "effective interval: ({}, {})\n",
        v.alpha.location, v.beta.location
    ));
    for c in &v.certificate {
        s.push_str(&format!(
            "  [{}] {:<24} {}\n",
            if c.holds { "x" } else { " " },
            c.id,
            c.statement
        ));
    }
    s
}

struct SimPlan {
    cfg: SimConfig,
    times: Vec<f64>,
}

fn plan(args: &SimulateArgs, pf: &ProblemFile) -> SimPlan {
    let f = &pf.simulation;
    let horizon = args.horizon.or(f.horizon).unwrap_or(DEFAULT_HORIZON);
    let mut cfg = SimConfig::new(
        horizon,
        args.dt.or(f.dt).unwrap_or(DEFAULT_DT),
        args.paths.or(f.paths).unwrap_or(DEFAULT_PATHS),
        args.seed.or(f.seed).unwrap_or(DEFAULT_SEED),
    );
    cfg.truncation_radius = args.radius.unwrap_or(DEFAULT_RADIUS);
    if let Some(t) = args.threads {
        cfg = cfg.with_threads(t);
    }
    let times = args
        .times
        .clone()
        .or_else(|| f.times.clone())
        .unwrap_or_else(|| vec![horizon]);
    SimPlan { cfg, times }
}

pub fn test_json(t: &MartingaleTest) -> Value {
    let (outcome, z) = match t.outcome {
        TestOutcome::ConsistentWithMartingale { z_score } => ("consistent_with_martingale", z_score),
        TestOutcome::MeanDeficit { z_score } => ("mean_deficit", z_score),
    };
    json!({
        "t": t.estimate.t,
        "mean": t.estimate.mean,
        "std_error": t.estimate.std_error,
        "outcome": outcome,
        "z_score": finite_or_string(z),
        "n_truncated": t.n_truncated,
        "n_hit_singular": t.n_hit_singular,
        "n_exited": t.n_exited,
        "caveat": t.caveat,
    })
}

pub fn cmd_simulate(args: &SimulateArgs, opts: &ClassifyOptions, quiet: bool, io: &mut Io) -> (i32, Value) {
    let mut report = json!({"command": "simulate"});
    let (pf, spec) = match load_and_build(&args.file, opts, &mut report) {
        Ok(x) => x,
        Err(e) => return validation_failure(&e, report, io),
    };
    let SimPlan { cfg, times } = plan(args, &pf);
    report["simulation"] = json!({
        "paths": cfg.n_paths,
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "times": times,
        "truncation_radius": cfg.truncation_radius,
        "scheme": "euler_maruyama",
    });
    if cfg.n_paths < 2 {
        let _ = writeln!(io.err, "error: need at least two paths for a standard error");
        return (EXIT_ERROR, report);
    }
    if times.is_empty() {
        let _ = writeln!(io.err, "error: --times must name at least one time");
        return (EXIT_ERROR, report);
    }
    let a = match singular_set(&spec, opts) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            let code = if matches!(e, ClassifyError::Undecidable { .. }) {
                EXIT_UNDECIDABLE
            } else {
                EXIT_ERROR
            };
            return (code, report);
        }
    };
    let samples = match simulate_z(&spec, &a, &cfg, &times) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            return (EXIT_ERROR, report);
        }
    };
    let text = render_text(&spec, &samples);
    let tests: Vec<MartingaleTest> = (0..times.len()).map(|i| test_samples(&samples, i)).collect();
    report["mc"] = json!({
        "estimates": tests.iter().map(test_json).collect::<Vec<_>>(),
        "text": text,
    });
    let last = tests.last().expect("at least one time");
    if !quiet {
        let _ = write!(io.out, "{text}");
        let _ = writeln!(
            io.out,
            "test at t = {}: {} (z = {:.3})",
            last.estimate.t,
            if last.outcome.is_deficit() {
                "mean_deficit"
            } else {
                "consistent_with_martingale"
            },
            last.outcome.z_score()
        );
    }
    let mut code = EXIT_OK;
    if args.check {
        let verdict = classify(&spec, opts);
        let check = match &verdict {
            Ok(v) => {
                let contradiction = v.level.is_martingale() && last.outcome.is_deficit();
                if contradiction {
                    code = EXIT_CONTRADICTION;
                    let _ = writeln!(
                        io.err,
                        "contradiction: verdict {} but E[Z_t] < 1 at significance 0.001",
                        v.level
                    );
                } else if !quiet {
                    let _ = writeln!(io.out, "check: verdict {} agrees with the simulation", v.level);
                }
                json!({"status": "checked", "verdict": v.level.as_str(), "contradiction": contradiction})
            }
            Err(e) => {
                if !quiet {
                    let _ = writeln!(io.out, "check: skipped ({e})");
                }
                json!({"status": "skipped", "reason": e.to_string()})
            }
        };
        report["check"] = check;
        report["classification"] = classification_json(&verdict);
    }
    (code, report)
}

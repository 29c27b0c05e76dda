//! Command-line front end: `certify`, `lift`, `run`, `sweep`.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::catalog::{envelope, Algorithm, Certificate};
use crate::certificates::{CertificateFile, Metric};
use crate::error::{invalid, Error, Result};
use crate::methods::{run_composite, run_fista, RunTrace};
use crate::problems::{make_problem, make_problem_cached, ProblemSpec};
use crate::report::{certify_cell, lift_cell, run_sweep, sig17, SweepConfig, XiMode};
use crate::schedules::StepsizeMatrix;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "peplift", version, about = "Generate, certify and lift optimized first-order methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the unconstrained certificate identity and multiplier signs.
    Certify(CertifyArgs),
    /// Lift a certificate to the composite setting and check feasibility.
    Lift(LiftArgs),
    /// Run a composite method on a problem instance.
    Run(RunArgs),
    /// Evaluate a grid of cells in parallel.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct CellArgs {
    /// silver, gsw, ogm or ogmg.
    #[arg(long)]
    algo: String,
    /// func or grad; defaults to the metric the family is certified for.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Number of steps.
    #[arg(long)]
    n: Option<usize>,
    /// Level for silver and gsw (`n = 2^k - 1`).
    #[arg(long)]
    k: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Also write the certificate itself as JSON.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LiftArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// `paper`, `pseudo` or a positive number.
    #[arg(long, default_value = "paper", allow_hyphen_values = true)]
    xi: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Func,
    Grad,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Func => Metric::Func,
            MetricArg::Grad => Metric::Grad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunAlgo {
    ProxgdSilver,
    ProxgdGsw,
    Pogm,
    Pogmg,
    Fista,
    ProxgdConst,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algo: RunAlgo,
    /// Problem specification (JSON).
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Stepsize for proxgd-const, in units of 1/L.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Per-iterate CSV output.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Trace summary JSON output.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for cached reference optima.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Lift(a) => cmd_lift(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OracleFailure(_) | Error::DegenerateCertificate(_) | Error::UnknownOptimum => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// Resolves `--n` / `--k` into the family's size parameter.
fn resolve_size(algo: Algorithm, n: Option<usize>, k: Option<usize>) -> Result<usize> {
    if algo.uses_level() {
        match (n, k) {
            (_, Some(k)) => {
                if let Some(n) = n {
                    if algo.steps(k)? != n {
                        return Err(invalid(format!("--n {n} does not match --k {k}")));
                    }
                }
                Ok(k)
            }
            (Some(n), None) => {
                if n >= 1 && (n + 1).is_power_of_two() {
                    Ok((n + 1).trailing_zeros() as usize)
                } else {
                    Err(invalid(format!("{algo} needs n = 2^k - 1, got {n}")))
                }
            }
            (None, None) => Err(invalid(format!("{algo} needs --k or --n"))),
        }
    } else {
        match (n, k) {
            (_, Some(_)) => Err(invalid("--k applies to silver and gsw only")),
            (Some(n), None) => Ok(n),
            (None, None) => Err(invalid(format!("{algo} needs --n"))),
        }
    }
}

fn cell(args: &CellArgs) -> Result<(Algorithm, usize)> {
    let algo: Algorithm = args.algo.parse()?;
    if let Some(m) = args.metric {
        algo.check_metric(m.into())?;
    }
    let size = resolve_size(algo, args.n, args.k)?;
    algo.steps(size)?;
    Ok((algo, size))
}

fn emit(json: &str, path: Option<&PathBuf>, line: String) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match path {
        Some(p) => {
            std::fs::write(p, json)?;
            writeln!(out, "{line}")?;
        }
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_certify(a: CertifyArgs) -> Result<bool> {
    let (algo, size) = cell(&a.cell)?;
    let row = certify_cell(algo, size)?;
    if let Some(p) = &a.export {
        let file = match algo.certificate(size)? {
            Certificate::Func(c) => CertificateFile::from(&c),
            Certificate::Grad(c) => CertificateFile::from(&c),
        };
        std::fs::write(p, file.to_json()?)?;
    }
    let line = format!(
        "{} certify {} n={} residual={} {}",
        algo,
        row.metric,
        row.n,
        sig17::format(row.max_residual()),
        verdict(row.pass)
    );
    emit(&row.to_json()?, a.cell.json.as_ref(), line)?;
    Ok(row.pass)
}

fn cmd_lift(a: LiftArgs) -> Result<bool> {
    let (algo, size) = cell(&a.cell)?;
    let xi: XiMode = a.xi.parse()?;
    let row = lift_cell(algo, size, xi)?;
    let line = format!(
        "{} lift {} n={} xi={} rate={} {}",
        algo,
        row.metric,
        row.n,
        row.xi.map(sig17::format).unwrap_or_default(),
        sig17::format(row.rate),
        verdict(row.pass)
    );
    emit(&row.to_json()?, a.cell.json.as_ref(), line)?;
    Ok(row.pass)
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let spec = ProblemSpec::load(&a.problem)?;
    let p = match &a.cache_dir {
        Some(dir) => make_problem_cached(&spec, dir)?,
        None => make_problem(&spec)?,
    };
    let x0 = spec.starting_point(p.dim());
    let family = match a.algo {
        RunAlgo::ProxgdSilver => Some(Algorithm::Silver),
        RunAlgo::ProxgdGsw => Some(Algorithm::Gsw),
        RunAlgo::Pogm => Some(Algorithm::Ogm),
        RunAlgo::Pogmg => Some(Algorithm::Ogmg),
        RunAlgo::Fista | RunAlgo::ProxgdConst => None,
    };
    let (trace, bound): (RunTrace, Option<(Metric, f64)>) = match family {
        Some(algo) => {
            let size = resolve_size(algo, a.n, a.k)?;
            let rate = lift_cell(algo, size, XiMode::Default)?.rate;
            (algo.run(&p, size, &x0)?, Some((algo.metric(), rate)))
        }
        None => {
            if a.k.is_some() {
                return Err(invalid("--k applies to proxgd-silver and proxgd-gsw only"));
            }
            let n = a.n.ok_or_else(|| invalid("--n is required"))?;
            if n < 1 {
                return Err(invalid("iteration count n must be at least 1"));
            }
            let trace = if a.algo == RunAlgo::Fista {
                run_fista(&p, n, &x0)?
            } else {
                if !(a.alpha > 0.0) || !a.alpha.is_finite() {
                    return Err(invalid("--alpha must be positive"));
                }
                let mut t = run_composite(&p, &StepsizeMatrix::diagonal(&vec![a.alpha; n])?, &x0)?;
                t.method = "proxgd-const".into();
                t
            };
            (trace, None)
        }
    };
    if let Some(path) = &a.csv {
        std::fs::write(path, trace.to_csv(p.f_star))?;
    }
    let summary = trace.summary(p.f_star, p.x_star.as_ref());
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }
    let n = trace.n();
    let gap = p.f_star.map(|fs| trace.objective(n) - fs);
    let mut line = format!(
        "{} n={} gap={} grad_norm_sq={}",
        trace.method,
        n,
        gap.map(sig17::format).unwrap_or_default(),
        sig17::format(trace.composite_grad_norm_sq(n))
    );
    let mut pass = true;
    if let Some((metric, rate)) = bound {
        let env = envelope(metric, rate, &trace, &p)?;
        pass = env.excess() <= 1e-9;
        line.push_str(&format!(
            " {metric}_bound={} ratio={} {}",
            sig17::format(env.bound),
            sig17::format(env.ratio()),
            verdict(pass)
        ));
    }
    println!("{line}");
    Ok(pass)
}

fn cmd_sweep(a: SweepArgs) -> Result<bool> {
    let config = SweepConfig::load(&a.config)?;
    if a.jobs == 0 {
        return Err(invalid("--jobs must be at least 1"));
    }
    let cells = run_sweep(&config, &a.out, a.jobs)?;
    let passed = cells.iter().filter(|c| c.pass()).count();
    println!("{passed}/{} cells passed", cells.len());
    Ok(passed == cells.len())
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zolo_svd::bench::{
    bench_accuracy, bench_iters, bench_structured_qr, order_table, run_pd, run_svd, BenchReport,
    BoundMode, IterConfig, Record, ReportFormat,
};
use zolo_svd::elliptic::{RPolicy, MAX_ORDER};
use zolo_svd::io::MatrixSource;
use zolo_svd::linalg::{Bounds, StackedQrKernel, DEFAULT_NB};
use zolo_svd::polar::{IterationRecord, DEFAULT_TOL};
use zolo_svd::svd::{Method, SvdOptions};
use zolo_svd::Error;

const EXIT_DOMAIN: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "zolo-svd", version, about = "Polar-decomposition SVD and its benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Polar decomposition of one matrix.
    Pd(RunArgs),
    /// Singular value decomposition of one matrix.
    Svd(RunArgs),
    /// Predicted iteration counts and the chosen Zolotarev order.
    ChooseR(ChooseRArgs),
    /// Iteration counts against their predictions.
    BenchIters(BenchItersArgs),
    /// Structured against dense stacked QR.
    BenchStructuredQr(BenchQrArgs),
    /// Residual and orthogonality over a matrix suite.
    BenchAccuracy(BenchAccuracyArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Matrix Market file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Synthetic matrix `n,kappa,seed`.
    #[arg(long, value_name = "N,KAPPA,SEED")]
    synthetic: Option<String>,
}

impl InputArgs {
    fn source(&self) -> Result<MatrixSource, Error> {
        match (&self.input, &self.synthetic) {
            (Some(path), None) => Ok(MatrixSource::MatrixMarketFile { path: path.clone() }),
            (None, Some(spec)) => MatrixSource::parse_synthetic(spec),
            _ => unreachable!("clap enforces exactly one input"),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Zolotarev order policy: `table` or `fixed:K`.
    #[arg(long, default_value = "table", value_parser = parse_r_policy)]
    r: RPolicy,
    /// Largest order the table policy may pick.
    #[arg(long, default_value_t = MAX_ORDER)]
    r_max: usize,
    /// Convergence parameter [default: 2^-52].
    #[arg(long, default_value_t = DEFAULT_TOL, hide_default_value = true)]
    tol: f64,
    /// QR panel width.
    #[arg(long, default_value_t = DEFAULT_NB)]
    nb: usize,
    /// Use the dense kernel for the stacked QR.
    #[arg(long)]
    dense_qr: bool,
    /// Worker budget (default: POLAR_SVD_WORKERS or the core count).
    #[arg(long)]
    workers: Option<usize>,
    /// Evaluate the Zolotarev terms in a plain loop.
    #[arg(long, conflicts_with = "workers")]
    serial: bool,
}

impl SolverArgs {
    fn options(&self, method: Method) -> SvdOptions {
        SvdOptions {
            method,
            r_policy: self.r,
            r_max: self.r_max,
            tol: self.tol,
            bounds: None,
            nb: self.nb,
            kernel: if self.dense_qr {
                StackedQrKernel::Dense
            } else {
                StackedQrKernel::Structured
            },
            workers: self.workers,
            serial: self.serial,
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Upper bound on the largest singular value.
    #[arg(long, requires = "beta")]
    alpha: Option<f64>,
    /// Lower bound on the smallest singular value.
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
    /// Estimate the bounds even when the input's spectrum is known.
    /// Synthetic inputs otherwise use alpha = 1, beta = 1/kappa.
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    estimate_bounds: bool,
}

impl BoundArgs {
    fn mode(&self) -> BoundMode {
        match (self.alpha, self.beta) {
            (Some(alpha), Some(beta)) => BoundMode::Override(Bounds { alpha, beta }),
            _ if self.estimate_bounds => BoundMode::Estimated,
            _ => BoundMode::Auto,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop the timing columns.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "zolo", value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ChooseRArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = MAX_ORDER)]
    r_max: usize,
    #[arg(long, default_value = "table", value_parser = parse_r_policy)]
    r: RPolicy,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchItersArgs {
    /// Matrix Market files; replaces the synthetic grid.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "1.29,14.0,9.06e3")]
    kappas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated `qdwh` and `zolo-rK` entries.
    #[arg(long, value_delimiter = ',', default_value = "qdwh,zolo-r2,zolo-r3,zolo-r4", value_parser = parse_config)]
    configs: Vec<IterConfig>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchQrArgs {
    /// Comma-separated `MxN` shapes.
    #[arg(long, value_delimiter = ',', default_value = "50x30,200x100,400x400,512x512", value_parser = parse_shape)]
    shapes: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1,1e2")]
    shifts: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_NB)]
    nb: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchAccuracyArgs {
    /// Matrix Market files; replaces the synthetic grid.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "100,300,1000")]
    ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e2,1e5,1e8,3.46e11")]
    kappas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "zolo,qdwh", value_parser = parse_method)]
    methods: Vec<Method>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_r_policy(s: &str) -> Result<RPolicy, String> {
    match s {
        "table" => Ok(RPolicy::Table),
        _ => match s.strip_prefix("fixed:").map(str::parse::<usize>) {
            Some(Ok(k)) => Ok(RPolicy::Fixed(k)),
            _ => Err(format!("expected `table` or `fixed:K`, got {s:?}")),
        },
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_config(s: &str) -> Result<IterConfig, String> {
    if s == "qdwh" {
        return Ok(IterConfig { method: Method::Qdwh, r: 1 });
    }
    match s.strip_prefix("zolo-r").map(str::parse::<usize>) {
        Some(Ok(r)) => Ok(IterConfig { method: Method::Zolo, r }),
        _ => Err(format!("expected `qdwh` or `zolo-rK`, got {s:?}")),
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected MxN, got {s:?}");
    let (m, n) = s.split_once('x').ok_or_else(bad)?;
    Ok((m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
}

fn grid(inputs: &[PathBuf], ns: &[usize], kappas: &[f64], seed: u64) -> Result<Vec<MatrixSource>, Error> {
    if !inputs.is_empty() {
        return Ok(inputs
            .iter()
            .map(|p| MatrixSource::MatrixMarketFile { path: p.clone() })
            .collect());
    }
    let mut out = Vec::new();
    for &n in ns {
        for &kappa in kappas {
            out.push(MatrixSource::synthetic(n, kappa, seed)?);
        }
    }
    Ok(out)
}

fn emit<T: Record>(command: &str, records: Vec<T>, out: &OutputArgs) -> Result<(), Error> {
    let mut report = BenchReport::new(command, records);
    if out.no_timings {
        report = report.without_timings();
    }
    match &out.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.write(out.format, &mut w)?;
            w.flush()?;
        }
        None => report.write(out.format, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pd(args) => {
            let source = args.input.source()?;
            let a = source.load()?;
            let opts = args.solver.options(args.method);
            let (rec, _) = with_log("pd", &args.output, || run_pd(&source, &a, args.bounds.mode(), &opts))?;
            emit("pd", vec![rec], &args.output)
        }
        Command::Svd(args) => {
            let source = args.input.source()?;
            let a = source.load()?;
            let opts = args.solver.options(args.method);
            let (rec, _) = with_log("svd", &args.output, || run_svd(&source, &a, args.bounds.mode(), &opts))?;
            emit("svd", vec![rec], &args.output)
        }
        Command::ChooseR(args) => emit("choose-r", order_table(args.kappa, args.r_max, args.r)?, &args.output),
        Command::BenchIters(args) => {
            let sources = grid(&args.input, &[args.n], &args.kappas, args.seed)?;
            let recs = bench_iters(&sources, &args.configs, args.bounds.mode(), &args.solver.options(Method::Zolo))?;
            emit("bench-iters", recs, &args.output)
        }
        Command::BenchStructuredQr(args) => {
            let recs = bench_structured_qr(&args.shapes, &args.shifts, args.nb, args.seed)?;
            emit("bench-structured-qr", recs, &args.output)
        }
        Command::BenchAccuracy(args) => {
            let sources = grid(&args.input, &args.ns, &args.kappas, args.seed)?;
            let recs = bench_accuracy(&sources, &args.methods, args.bounds.mode(), &args.solver.options(Method::Zolo))?;
            emit("bench-accuracy", recs, &args.output)
        }
    }
}

/// On non-convergence the iteration log is written as the report before
/// the error is passed on.
fn with_log<T>(command: &str, out: &OutputArgs, f: impl FnOnce() -> Result<T, Error>) -> Result<T, Error> {
    match f() {
        Err(Error::NonConvergence { method, iters, log }) => {
            emit::<IterationRecord>(command, log.clone(), out)?;
            Err(Error::NonConvergence { method, iters, log })
        }
        other => other,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Term { source, .. } => exit_code(source),
        Error::Report(_) => 1,
        _ => EXIT_DOMAIN,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zolo-svd: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

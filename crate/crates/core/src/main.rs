use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rgd_core::error::{Error, Result};
use rgd_core::harness::{self, RunSummary};
use rgd_core::problems::{self, ProblemInstance, ProblemKind, ProblemSpec};
use rgd_core::solve::{Method, SolveOptions, SolveReport};
use rgd_core::theory;

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_SIZE_GUARD: u8 = 4;

#[derive(Parser)]
#[command(name = "rgd", version, about = "Relaxed greedy deterministic row/column solvers and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test problem directory (A.mtx, b.mtx, xstar.mtx, meta.json).
    Gen {
        #[command(flatten)]
        problem: GenArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance, optionally repeated; writes reports.json and summary.csv.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Output directory; the summary goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep described by a JSON config.
    Bench {
        /// JSON configuration file.
        config: PathBuf,
        /// Output directory for bench.csv and trend.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check per-iteration contraction against the theoretical bounds.
    Certify {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Runs for the statistical check of randomized methods.
        #[arg(long, default_value_t = theory::MIN_STATISTICAL_RUNS)]
        repeats: usize,
        /// Certificate CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format RSE traces from report files written by `solve`.
    TracePlot {
        /// Report files (reports.json); the first run of each is used.
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Randn,
    Smatrix,
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "randn")]
    kind: Kind,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Rank of an smatrix instance (defaults to min(m, n)).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 1.25)]
    sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Add noise from the null space of Aᵀ.
    #[arg(long)]
    inconsistent: bool,
    /// ‖δb‖ / ‖Ax*‖ for inconsistent instances.
    #[arg(long, default_value_t = problems::DEFAULT_NOISE_SCALE)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn spec(&self) -> Result<ProblemSpec> {
        let (m, n) = match (self.m, self.n) {
            (Some(m), Some(n)) => (m, n),
            _ => return Err(Error::Usage("--m and --n are required to generate a problem".into())),
        };
        let kind = match self.kind {
            Kind::Randn => ProblemKind::Randn,
            Kind::Smatrix => ProblemKind::Smatrix {
                r: self.r.unwrap_or(m.min(n)),
                sigma1: self.sigma1,
                sigma2: self.sigma2,
            },
        };
        Ok(ProblemSpec {
            kind,
            m,
            n,
            seed: self.seed,
            inconsistent: self.inconsistent,
            noise_scale: self.noise_scale,
        })
    }
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Problem directory written by `gen`; otherwise one is generated from the flags.
    #[arg(long, conflicts_with_all = ["m", "n"])]
    problem: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

impl SourceArgs {
    fn load(&self) -> Result<ProblemInstance> {
        match &self.problem {
            Some(dir) => ProblemInstance::load(dir),
            None => problems::generate(&self.gen.spec()?),
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long)]
    method: Method,
    /// Relaxation parameter θ₁ (row) or θ₂ (column).
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 0.5)]
    eta1: f64,
    #[arg(long, default_value_t = 0.1)]
    eta2: f64,
    #[arg(long, default_value_t = 100)]
    block_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Solver seed for randomized methods.
    #[arg(long = "solver-seed", default_value_t = 0)]
    solver_seed: u64,
}

impl SolverArgs {
    fn options(&self, record_steps: bool) -> SolveOptions {
        let mut opts = SolveOptions {
            record_steps,
            ..Default::default()
        };
        opts.selection.theta1 = self.theta;
        opts.selection.theta2 = self.theta;
        opts.selection.eta1 = self.eta1;
        opts.selection.eta2 = self.eta2;
        opts.selection.block_size = self.block_size;
        opts.stop.rse_tol = self.tol;
        opts.stop.max_iters = self.max_iters;
        opts
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_gen(args: &GenArgs, out: &Path) -> Result<u8> {
    let inst = problems::generate(&args.spec()?)?;
    inst.save(out)?;
    eprintln!(
        "wrote {}x{} {} instance to {}",
        inst.a.nrows(),
        inst.a.ncols(),
        if inst.consistent { "consistent" } else { "inconsistent" },
        out.display()
    );
    Ok(0)
}

fn cmd_solve(source: &SourceArgs, solver: &SolverArgs, repeats: usize, out: Option<&Path>) -> Result<u8> {
    let inst = source.load()?;
    let opts = solver.options(false);
    let reports = harness::solve_repeated(solver.method, &inst, &opts, solver.solver_seed, repeats)?;
    let summary = RunSummary::from_reports(&reports)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let file = BufWriter::new(File::create(dir.join("reports.json"))?);
            serde_json::to_writer(file, &reports)?;
            harness::write_summary_csv(File::create(dir.join("summary.csv"))?, std::slice::from_ref(&summary))?;
        }
        None => harness::write_summary_csv(io::stdout().lock(), std::slice::from_ref(&summary))?,
    }
    for r in &reports {
        if !harness::is_success(r.termination_reason) {
            eprintln!(
                "{} run with seed {} ended {} after {} iterations (RSE {:e})",
                r.method, r.seed, r.termination_reason, r.iterations, r.final_rse
            );
        }
    }
    Ok(if summary.converged == summary.runs { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_bench(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = harness::parse_bench_config(&fs::read_to_string(config)?)?;
    let res = harness::run_bench(&cfg)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            harness::write_bench_csv(File::create(dir.join("bench.csv"))?, &res.rows)?;
            harness::write_trend_csv(File::create(dir.join("trend.csv"))?, &res.trends)?;
        }
        None => {
            harness::write_bench_csv(io::stdout().lock(), &res.rows)?;
            println!();
            harness::write_trend_csv(io::stdout().lock(), &res.trends)?;
        }
    }
    Ok(0)
}

fn cmd_certify(source: &SourceArgs, solver: &SolverArgs, repeats: usize, out: Option<&Path>) -> Result<u8> {
    let inst = source.load()?;
    theory::check_size(&inst.a)?;
    let opts = solver.options(true);
    let method = solver.method;
    if method.is_randomized() {
        let reports = harness::solve_repeated(method, &inst, &opts, solver.solver_seed, repeats)?;
        let check = theory::certify_randomized(&reports, &inst.a)?;
        let certs = theory::certify_run(&reports[0], &inst.a)?;
        theory::write_certificates_csv(output(out)?, &certs)?;
        eprintln!(
            "{method}: mean geometric step ratio {:.6} ± {:.2e} (3 s.e. band) vs expected factor {:.6} over {} runs: {}",
            check.mean_ratio,
            3.0 * check.std_error,
            check.factor,
            check.runs,
            if check.satisfied { "PASS" } else { "FAIL" }
        );
        return Ok(if check.satisfied { 0 } else { EXIT_NOT_CONVERGED });
    }
    let report = rgd_core::run_method(method, &inst.a, &inst.b, &inst.x_star, &opts, solver.solver_seed)?;
    let certs = theory::certify_run(&report, &inst.a)?;
    theory::write_certificates_csv(output(out)?, &certs)?;
    let failed = certs.iter().filter(|c| !c.satisfied).count();
    eprintln!(
        "{method}: {} of {} step certificates satisfied: {}",
        certs.len() - failed,
        certs.len(),
        if failed == 0 { "PASS" } else { "FAIL" }
    );
    Ok(if failed == 0 { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_trace_plot(paths: &[PathBuf], out: Option<&Path>) -> Result<u8> {
    let mut firsts: Vec<SolveReport> = Vec::new();
    for p in paths {
        let reports = harness::parse_reports(&fs::read_to_string(p)?)?;
        match reports.into_iter().next() {
            Some(r) => firsts.push(r),
            None => eprintln!("{}: no reports", p.display()),
        }
    }
    let refs: Vec<&SolveReport> = firsts.iter().collect();
    harness::write_trace_csv(output(out)?, &refs)?;
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Parse { .. } | Error::Json(_) => EXIT_USAGE,
        Error::SizeGuard(_) => EXIT_SIZE_GUARD,
        Error::Stalled { .. } | Error::DegenerateStep { .. } | Error::Subsolver { .. } => EXIT_NOT_CONVERGED,
        Error::Generation(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { problem, out } => cmd_gen(problem, out),
        Command::Solve {
            source,
            solver,
            repeats,
            out,
        } => cmd_solve(source, solver, *repeats, out.as_deref()),
        Command::Bench { config, out } => cmd_bench(config, out.as_deref()),
        Command::Certify {
            source,
            solver,
            repeats,
            out,
        } => cmd_certify(source, solver, *repeats, out.as_deref()),
        Command::TracePlot { reports, out } => cmd_trace_plot(reports, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rgd: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

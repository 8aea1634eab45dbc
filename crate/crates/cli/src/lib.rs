//! Command-line front end: `solve`, `bench` and `check`.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 iteration limit reached,
//! 3 solver breakdown, 4 failed verification.

mod bench;
mod check;
mod io;
mod solve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use io::{SolutionFormat, SolveMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Environment variable capping kernel threads when `--parallel` is set.
pub const THREADS_ENV: &str = "SYLKRYLOV_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "sylkrylov",
    version,
    about = "Low-rank Krylov solvers for A X + X B = C1 C2^T"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one equation and write the solution, history and metadata.
    Solve(SolveArgs),
    /// Run one of the standard examples with several methods.
    Bench(BenchArgs),
    /// Recompute the true residual of a stored solution.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// JSON manifest; command-line flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Generate the operator and right-hand side of a standard example
    /// (ex1..ex4) instead of reading them.
    #[arg(long, conflicts_with_all = ["a", "b", "c1", "c2"])]
    example: Option<String>,
    /// Matrix Market file with A.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Matrix Market file with B; omit for the Lyapunov equation A X + X A^T = C1 C1^T.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Matrix Market file with C1; omit to draw a random n x s factor from --seed.
    #[arg(long)]
    c1: Option<PathBuf>,
    /// Matrix Market file with C2 (Sylvester mode only).
    #[arg(long)]
    c2: Option<PathBuf>,
    /// Columns of a generated right-hand side factor.
    #[arg(long)]
    rank: Option<usize>,
    /// mo-cg, mo-bicgstab, f-cg, f-bicgstab, t-cg or t-bicgstab (default f-cg for Lyapunov, f-bicgstab otherwise).
    #[arg(long)]
    method: Option<String>,
    /// Relative residual tolerance (default: the example's, else 1e-8).
    #[arg(long)]
    tol: Option<f64>,
    /// Relative truncation threshold for t-* methods (default 1e-10).
    #[arg(long = "eps-trunc")]
    eps_trunc: Option<f64>,
    /// Iteration cap (default min(10 ceil(sqrt(n m)), 10000)).
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Seed for generated right-hand sides (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Problem scale for --example.
    #[arg(long)]
    scale: Option<String>,
    /// Output directory for the solution files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multithreaded sparse kernels (results may differ in the last bits between runs).
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// ex1, ex2, ex3 or ex4.
    example: String,
    /// desk (grid 30 / 8) or full (grid 100, 20 or 25).
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Comma-separated method ids, or `all` for the example's whole family.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated truncation thresholds for truncated methods (default 1e-8,1e-10,1e-12).
    #[arg(long = "eps-trunc")]
    eps_trunc: Option<String>,
    /// Relative residual tolerance (default 1e-8 for ex1/ex2, 1e-6 for ex3/ex4).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap per method.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Seed for the right-hand side factors (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Block size of the right-hand side factors (default 3).
    #[arg(long)]
    s: Option<usize>,
    /// Grid size override.
    #[arg(long)]
    grid: Option<usize>,
    /// Directory for the JSON report and per-method history CSVs.
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Multithreaded sparse kernels.
    #[arg(long)]
    parallel: bool,
    /// Run methods concurrently.
    #[arg(long = "parallel-methods")]
    parallel_methods: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Directory written by `solve`.
    solution: PathBuf,
    /// Input files; default to the paths recorded in meta.json.
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    c1: Option<PathBuf>,
    #[arg(long)]
    c2: Option<PathBuf>,
}

fn configure_parallel(on: bool) {
    sylkrylov::linalg::parallel::set_enabled(on);
    if !on {
        return;
    }
    if let Some(threads) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Fails only if the pool is already built, which keeps the earlier cap.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Solve(args) => {
            configure_parallel(args.parallel);
            solve::cmd_solve(args)
        }
        Command::Bench(args) => {
            configure_parallel(args.parallel);
            bench::cmd_bench(args)
        }
        Command::Check(args) => check::cmd_check(args),
    }
}

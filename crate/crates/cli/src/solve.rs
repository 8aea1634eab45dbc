//! `solve`: one equation from files (or a standard example) to a solution directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sylkrylov::bench::{
    build_instance, run_method, BenchParams, ExampleId, Method, MethodOutput, Scale,
};
use sylkrylov::linalg::{read_dense, read_sparse, write_dense, write_sparse};
use sylkrylov::problems::{random_rhs, ProblemInstance};
use sylkrylov::{SolveStatus, SolverConfig};

use crate::io::{digest, write_history, Inputs, SolutionFormat, SolveMeta, Timings, HISTORY_FILE};
use crate::{SolveArgs, EXIT_BREAKDOWN, EXIT_INPUT, EXIT_MAX_ITER, EXIT_OK};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_EPS_TRUNC: f64 = 1e-10;

/// Everything needed to reproduce a solve; every field is optional in the
/// JSON form and may be overridden on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveManifest {
    pub example: Option<String>,
    pub scale: Option<String>,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub c1: Option<PathBuf>,
    pub c2: Option<PathBuf>,
    pub rank: Option<usize>,
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub eps_trunc: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl SolveManifest {
    fn from_args(args: SolveArgs) -> Result<Self> {
        let mut m: SolveManifest = match &args.manifest {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut m: SolveManifest = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                // Relative paths in a manifest are relative to the manifest.
                let base = path.parent().unwrap_or(Path::new("."));
                for p in [&mut m.a, &mut m.b, &mut m.c1, &mut m.c2, &mut m.out]
                    .into_iter()
                    .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                m
            }
            None => SolveManifest::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if args.$f.is_some() { m.$f = args.$f; } )* };
        }
        over!(example, scale, a, b, c1, c2, rank, method, tol, eps_trunc, max_iter, seed, out);
        if m.example.is_some() && [&m.a, &m.b, &m.c1, &m.c2].iter().any(|p| p.is_some()) {
            bail!("an example manifest cannot also name input files");
        }
        Ok(m)
    }
}

struct Loaded {
    problem: ProblemInstance,
    example: Option<ExampleId>,
    default_tol: Option<f64>,
    generated_rhs: bool,
}

fn load(m: &SolveManifest, seed: u64) -> Result<Loaded> {
    if let Some(ex) = &m.example {
        let example: ExampleId = ex.parse().map_err(|e: String| anyhow!(e))?;
        let scale: Scale = m
            .scale
            .as_deref()
            .unwrap_or("desk")
            .parse()
            .map_err(|e: String| anyhow!(e))?;
        let params = BenchParams {
            s: m.rank.unwrap_or(BenchParams::default().s),
            seed,
            ..BenchParams::default()
        };
        if params.s == 0 {
            bail!("--rank must be at least 1");
        }
        return Ok(Loaded {
            problem: build_instance(example, scale, &params),
            example: Some(example),
            default_tol: Some(example.default_tol()),
            generated_rhs: true,
        });
    }
    if m.scale.is_some() {
        bail!("--scale applies only with --example");
    }
    let a_path =
        m.a.as_ref()
            .ok_or_else(|| anyhow!("missing --a (or --example)"))?;
    let a = read_sparse(a_path).with_context(|| format!("reading A from {}", a_path.display()))?;
    let n = a.nrows();
    let b = match &m.b {
        Some(p) => Some(read_sparse(p).with_context(|| format!("reading B from {}", p.display()))?),
        None => None,
    };
    let rank = m.rank.unwrap_or(1);
    if m.c1.is_none() && rank == 0 {
        bail!("--rank must be at least 1");
    }
    let c1 = match &m.c1 {
        Some(p) => read_dense(p).with_context(|| format!("reading C1 from {}", p.display()))?,
        None => random_rhs(n, rank, seed),
    };
    let problem = match b {
        None => {
            if m.c2.is_some() {
                bail!("C2 given without B; the Lyapunov equation uses C2 = C1");
            }
            if !a.is_square() || c1.nrows() != n {
                bail!(
                    "Lyapunov mode needs square A ({n} x {}) and C1 with {n} rows, got {:?}",
                    a.ncols(),
                    c1.shape()
                );
            }
            ProblemInstance::lyapunov(a, c1, "lyapunov", seed)
        }
        Some(b) => {
            let c2 = match (&m.c2, &m.c1) {
                (Some(p), _) => {
                    read_dense(p).with_context(|| format!("reading C2 from {}", p.display()))?
                }
                (None, None) => random_rhs(b.nrows(), rank, seed.wrapping_add(1)),
                (None, Some(_)) => bail!("Sylvester mode with a given C1 also needs --c2"),
            };
            if !a.is_square()
                || !b.is_square()
                || c1.nrows() != n
                || c2.nrows() != b.nrows()
                || c1.ncols() != c2.ncols()
            {
                bail!(
                    "dimensions do not conform: A {:?}, B {:?}, C1 {:?}, C2 {:?}",
                    (a.nrows(), a.ncols()),
                    (b.nrows(), b.ncols()),
                    c1.shape(),
                    c2.shape()
                );
            }
            ProblemInstance::sylvester(a, b, c1, c2, "sylvester", seed)
        }
    };
    Ok(Loaded {
        problem,
        example: None,
        default_tol: None,
        generated_rhs: m.c1.is_none(),
    })
}

fn write_solution(out: &MethodOutput, dir: &Path) -> Result<SolutionFormat> {
    Ok(match out {
        MethodOutput::Factorized(s) => {
            write_dense(&s.v, dir.join("V.mtx"))?;
            write_dense(&s.core, dir.join("core.mtx"))?;
            write_dense(&s.w, dir.join("W.mtx"))?;
            SolutionFormat::Factored
        }
        MethodOutput::General(s) => {
            write_dense(&s.x.u, dir.join("V.mtx"))?;
            write_dense(&s.x.s, dir.join("core.mtx"))?;
            write_dense(&s.x.v, dir.join("W.mtx"))?;
            SolutionFormat::Factored
        }
        MethodOutput::Symmetric(s) => {
            write_dense(&s.x.z, dir.join("Z.mtx"))?;
            write_dense(&s.x.d, dir.join("D.mtx"))?;
            SolutionFormat::Symmetric
        }
        MethodOutput::Dense(s) => {
            write_dense(&s.x, dir.join("X.mtx"))?;
            SolutionFormat::Dense
        }
    })
}

/// Digests of the input files, writing generated operators and factors into
/// `dir/inputs` so `check` can find them.
fn record_inputs(m: &SolveManifest, loaded: &Loaded, dir: &Path) -> Result<Inputs> {
    let d = |p: &Option<PathBuf>| p.as_deref().map(digest).transpose();
    let mut inputs = Inputs {
        a: d(&m.a)?,
        b: d(&m.b)?,
        c1: d(&m.c1)?,
        c2: d(&m.c2)?,
    };
    let p = &loaded.problem;
    let inputs_dir = dir.join("inputs");
    if loaded.example.is_some() || loaded.generated_rhs {
        fs::create_dir_all(&inputs_dir)?;
    }
    if loaded.example.is_some() {
        let a = inputs_dir.join("A.mtx");
        write_sparse(&p.a, &a)?;
        inputs.a = Some(digest(&a)?);
        if let Some(b) = &p.b {
            let bp = inputs_dir.join("B.mtx");
            write_sparse(b, &bp)?;
            inputs.b = Some(digest(&bp)?);
        }
    }
    if loaded.generated_rhs {
        let c1 = inputs_dir.join("C1.mtx");
        write_dense(&p.c1, &c1)?;
        inputs.c1 = Some(digest(&c1)?);
        if !p.is_lyapunov() {
            let c2 = inputs_dir.join("C2.mtx");
            write_dense(&p.c2, &c2)?;
            inputs.c2 = Some(digest(&c2)?);
        }
    }
    Ok(inputs)
}

fn execute(args: SolveArgs) -> Result<SolveStatus> {
    let m = SolveManifest::from_args(args)?;
    let seed = m.seed.unwrap_or(DEFAULT_SEED);
    let out_dir = m.out.clone().ok_or_else(|| anyhow!("missing --out"))?;
    let loaded = load(&m, seed)?;
    let p = &loaded.problem;
    let method: Method = match &m.method {
        Some(s) => s.parse().map_err(|e: String| anyhow!(e))?,
        None if p.is_lyapunov() => Method::FCg,
        None => Method::FBicgstab,
    };
    let tol = m
        .tol
        .or(loaded.default_tol)
        .unwrap_or(SolverConfig::default().eps_tol);
    let mut cfg = SolverConfig::with_tol(tol);
    cfg.max_iter = m.max_iter;
    let eps_trunc = method
        .is_truncated()
        .then(|| m.eps_trunc.unwrap_or(DEFAULT_EPS_TRUNC));

    let out = run_method(method, p, &cfg, eps_trunc.unwrap_or(0.0))?;
    let true_res = out.true_residual(p)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let format = write_solution(&out, &out_dir)?;
    let history = out.history();
    write_history(history, &out_dir.join(HISTORY_FILE))?;
    let inputs = record_inputs(&m, &loaded, &out_dir)?;
    let bookkept_rank = match &out {
        MethodOutput::Factorized(s) => Some(s.bookkept_rank),
        _ => None,
    };
    let meta = SolveMeta {
        format,
        method: method.id().to_string(),
        lyapunov: p.is_lyapunov(),
        tol,
        eps_trunc,
        max_iter: m.max_iter,
        seed,
        example: loaded.example.map(|e| e.id().to_string()),
        n: p.n(),
        m: p.m(),
        s: p.rank(),
        inputs,
        status: out.status(),
        breakdown: out.breakdown().map(str::to_string),
        iterations: history.iterations(),
        final_rel_residual: history.final_rel_residual(),
        final_true_residual: true_res,
        rank: out.rank(),
        bookkept_rank,
        timings: Timings::of(history),
    };
    meta.write(&out_dir)?;
    println!(
        "{method}: {:?} after {} iterations, true relative residual {true_res:e}",
        meta.status, meta.iterations
    );
    if let Some(msg) = &meta.breakdown {
        eprintln!("breakdown: {msg}");
    }
    Ok(meta.status)
}

pub(crate) fn cmd_solve(args: SolveArgs) -> i32 {
    match execute(args) {
        Ok(SolveStatus::Converged) => EXIT_OK,
        Ok(SolveStatus::MaxIter) => EXIT_MAX_ITER,
        Ok(SolveStatus::Breakdown) => EXIT_BREAKDOWN,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

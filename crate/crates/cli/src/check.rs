//! `check`: recompute the true residual of a stored solution.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sylkrylov::factorized::lowrank_residual;
use sylkrylov::linalg::{read_dense, read_sparse, DenseMatrix};
use sylkrylov::reference::dense_relative_residual;

use crate::io::{digest, InputDigest, SolutionFormat, SolveMeta};
use crate::{CheckArgs, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK};

/// Failed verification is reported when the residual exceeds this multiple of
/// the recorded tolerance.
pub const CHECK_FACTOR: f64 = 10.0;

fn pick(flag: Option<PathBuf>, recorded: &Option<InputDigest>) -> Option<PathBuf> {
    flag.or_else(|| recorded.as_ref().map(|d| d.path.clone()))
}

fn warn_digest(path: &Path, recorded: &Option<InputDigest>) {
    if let (Some(rec), Ok(now)) = (recorded, digest(path)) {
        if rec.sha256 != now.sha256 {
            eprintln!(
                "warning: {} differs from the file used to solve (sha256 mismatch)",
                path.display()
            );
        }
    }
}

fn read_solution(dir: &Path, name: &str) -> Result<DenseMatrix> {
    let path = dir.join(name);
    read_dense(&path).with_context(|| format!("reading {}", path.display()))
}

/// Returns `(relative residual, tolerance)`.
fn residual(args: CheckArgs) -> Result<(f64, f64)> {
    let dir = &args.solution;
    let meta = SolveMeta::read(dir)?;
    let a_path = pick(args.a, &meta.inputs.a)
        .ok_or_else(|| anyhow!("no A recorded in meta.json; pass --a"))?;
    let c1_path = pick(args.c1, &meta.inputs.c1);
    let b_path = pick(args.b, &meta.inputs.b);
    let c2_path = pick(args.c2, &meta.inputs.c2);
    for (p, rec) in [
        (Some(&a_path), &meta.inputs.a),
        (b_path.as_ref(), &meta.inputs.b),
        (c1_path.as_ref(), &meta.inputs.c1),
        (c2_path.as_ref(), &meta.inputs.c2),
    ] {
        if let Some(p) = p {
            warn_digest(p, rec);
        }
    }
    let c1_path = c1_path.ok_or_else(|| {
        anyhow!(
            "no C1 recorded in meta.json (it was generated from seed {}); pass --c1",
            meta.seed
        )
    })?;

    let a = read_sparse(&a_path).with_context(|| format!("reading A from {}", a_path.display()))?;
    let c1 =
        read_dense(&c1_path).with_context(|| format!("reading C1 from {}", c1_path.display()))?;
    let (b, c2) = match (b_path, meta.lyapunov) {
        (None, true) => (a.transpose(), c1.clone()),
        (Some(bp), false) => {
            let b = read_sparse(&bp).with_context(|| format!("reading B from {}", bp.display()))?;
            let c2p = c2_path.ok_or_else(|| anyhow!("no C2 recorded in meta.json; pass --c2"))?;
            let c2 =
                read_dense(&c2p).with_context(|| format!("reading C2 from {}", c2p.display()))?;
            (b, c2)
        }
        (Some(_), true) => {
            bail!("the stored solution is for a Lyapunov equation; B must not be given")
        }
        (None, false) => bail!("the stored solution is for a Sylvester equation; pass --b"),
    };
    if c1.ncols() != c2.ncols() || c1.nrows() != a.nrows() || c2.nrows() != b.nrows() {
        bail!(
            "C1 {:?} and C2 {:?} do not conform with A and B",
            c1.shape(),
            c2.shape()
        );
    }

    let res = match meta.format {
        SolutionFormat::Factored => {
            let v = read_solution(dir, "V.mtx")?;
            let core = read_solution(dir, "core.mtx")?;
            let w = read_solution(dir, "W.mtx")?;
            let (r, rhs) = lowrank_residual(&a, &b, &c1, &c2, &v, &core, &w)?;
            r / rhs
        }
        SolutionFormat::Symmetric => {
            let z = read_solution(dir, "Z.mtx")?;
            let d = read_solution(dir, "D.mtx")?;
            let (r, rhs) = lowrank_residual(&a, &b, &c1, &c2, &z, &d, &z)?;
            r / rhs
        }
        SolutionFormat::Dense => {
            let x = read_solution(dir, "X.mtx")?;
            dense_relative_residual(&a, &b, &c1.matmul_t(&c2), &x)?
        }
    };
    Ok((res, meta.tol))
}

pub(crate) fn cmd_check(args: CheckArgs) -> i32 {
    match residual(args) {
        Ok((res, tol)) => {
            println!("{res:e}");
            if res <= CHECK_FACTOR * tol {
                EXIT_OK
            } else {
                eprintln!("residual {res:e} exceeds {CHECK_FACTOR} x tolerance {tol:e}");
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

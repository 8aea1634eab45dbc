//! File formats shared by the subcommands: history CSV, meta.json, digests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sylkrylov::history::ConvergenceHistory;
use sylkrylov::SolveStatus;

pub const META_FILE: &str = "meta.json";
pub const HISTORY_FILE: &str = "history.csv";

/// Layout of a stored solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionFormat {
    /// `X = V · core · Wᵀ` in V.mtx, core.mtx, W.mtx.
    Factored,
    /// `X = Z · D · Zᵀ` in Z.mtx, D.mtx.
    Symmetric,
    /// `X` in X.mtx.
    Dense,
}

impl SolutionFormat {
    pub fn files(self) -> &'static [&'static str] {
        match self {
            SolutionFormat::Factored => &["V.mtx", "core.mtx", "W.mtx"],
            SolutionFormat::Symmetric => &["Z.mtx", "D.mtx"],
            SolutionFormat::Dense => &["X.mtx"],
        }
    }
}

/// An input file and the SHA-256 of its bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub a: Option<InputDigest>,
    pub b: Option<InputDigest>,
    pub c1: Option<InputDigest>,
    pub c2: Option<InputDigest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub basic_ops_s: f64,
    pub krylov_process_s: f64,
    pub truncation_s: f64,
}

impl Timings {
    pub fn of(h: &ConvergenceHistory) -> Self {
        Self {
            total_s: h.total_s(),
            basic_ops_s: h.basic_ops_s(),
            krylov_process_s: h.krylov_process_s(),
            truncation_s: h.truncation_s(),
        }
    }
}

/// Contents of meta.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub format: SolutionFormat,
    pub method: String,
    pub lyapunov: bool,
    pub tol: f64,
    pub eps_trunc: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: u64,
    /// Standard example the inputs were generated from, if any.
    pub example: Option<String>,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub inputs: Inputs,
    pub status: SolveStatus,
    pub breakdown: Option<String>,
    pub iterations: usize,
    pub final_rel_residual: f64,
    pub final_true_residual: f64,
    /// Width of the stored factors (absent for dense solutions).
    pub rank: Option<usize>,
    /// Factor width before dead basis columns were dropped (factorized methods).
    pub bookkept_rank: Option<usize>,
    pub timings: Timings,
}

impl SolveMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(META_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

pub fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        path: fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Columns: iteration, rel_residual, cumulative_time_s, basic_ops_s,
/// krylov_process_s, truncation_s (per-iteration category times).
pub fn write_history(h: &ConvergenceHistory, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "iteration",
        "rel_residual",
        "cumulative_time_s",
        "basic_ops_s",
        "krylov_process_s",
        "truncation_s",
    ])?;
    for (r, cum) in h.records.iter().zip(h.cumulative_s()) {
        w.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.rel_residual),
            format!("{cum:e}"),
            format!("{:e}", r.basic_ops_s),
            format!("{:e}", r.krylov_process_s),
            format!("{:e}", r.truncation_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

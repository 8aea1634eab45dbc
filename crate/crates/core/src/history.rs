//! Solver configuration, termination status and per-iteration history.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::krylov::KrylovError;
use crate::linalg::LinalgError;

/// Hard cap applied to the default iteration limit.
pub const MAX_ITER_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `‖R_k‖ ≤ ‖R_0‖ · eps_tol`.
    pub eps_tol: f64,
    /// `None` selects `10·⌈√(n·m)⌉`, capped at [`MAX_ITER_CAP`].
    pub max_iter: Option<usize>,
    pub breakdown_tol: f64,
    /// Full reorthogonalization for block Lanczos bases (off by default).
    pub lanczos_reorthogonalization: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_tol: 1e-8,
            max_iter: None,
            breakdown_tol: 1e-12,
            lanczos_reorthogonalization: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(eps_tol: f64) -> Self {
        Self {
            eps_tol,
            ..Self::default()
        }
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn iteration_limit(&self, n: usize, m: usize) -> usize {
        self.max_iter.unwrap_or_else(|| {
            let k = ((n as f64) * (m as f64)).sqrt().ceil() as usize;
            (10 * k).min(MAX_ITER_CAP)
        })
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            return Err(SolveError::InvalidConfig(format!(
                "eps_tol must be positive and finite, got {}",
                self.eps_tol
            )));
        }
        if !(self.breakdown_tol >= 0.0 && self.breakdown_tol.is_finite()) {
            return Err(SolveError::InvalidConfig(format!(
                "breakdown_tol must be nonnegative, got {}",
                self.breakdown_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error("{which} is not symmetric (max |a_ij - a_ji| = {asymmetry:e})")]
    NotSymmetric { which: &'static str, asymmetry: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dense storage of {entries} entries exceeds the limit of {limit}")]
    TooLarge { entries: f64, limit: f64 },
    #[error("the Sylvester operator is numerically singular")]
    SingularOperator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

/// Timing categories used in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    /// Small-matrix or low-rank arithmetic and convergence checks.
    BasicOps,
    /// Block Lanczos / Arnoldi extensions.
    KrylovProcess,
    /// Low-rank truncations.
    Truncation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖R_k‖ / ‖R_0‖` as tracked by the solver.
    pub rel_residual: f64,
    pub basic_ops_s: f64,
    pub krylov_process_s: f64,
    pub truncation_s: f64,
}

impl IterationRecord {
    pub fn total_s(&self) -> f64 {
        self.basic_ops_s + self.krylov_process_s + self.truncation_s
    }
}

/// Record 0 holds the initial residual (always 1) and setup time; record `k`
/// holds the residual after iteration `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn rel_residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rel_residual).collect()
    }

    pub fn final_rel_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.rel_residual)
    }

    pub fn basic_ops_s(&self) -> f64 {
        self.records.iter().map(|r| r.basic_ops_s).sum()
    }

    pub fn krylov_process_s(&self) -> f64 {
        self.records.iter().map(|r| r.krylov_process_s).sum()
    }

    pub fn truncation_s(&self) -> f64 {
        self.records.iter().map(|r| r.truncation_s).sum()
    }

    pub fn total_s(&self) -> f64 {
        self.records.iter().map(IterationRecord::total_s).sum()
    }

    /// Running sums of per-record time.
    pub fn cumulative_s(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.total_s();
                Some(*acc)
            })
            .collect()
    }

    pub(crate) fn push(&mut self, iteration: usize, rel_residual: f64, timer: &mut Timer) {
        let [basic, krylov, trunc] = timer.take();
        self.records.push(IterationRecord {
            iteration,
            rel_residual,
            basic_ops_s: basic,
            krylov_process_s: krylov,
            truncation_s: trunc,
        });
    }
}

/// Accumulates monotonic-clock time per [`Category`] between history records.
#[derive(Debug, Default)]
pub(crate) struct Timer {
    acc: [f64; 3],
}

impl Timer {
    pub(crate) fn time<T>(&mut self, cat: Category, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let slot = match cat {
            Category::BasicOps => 0,
            Category::KrylovProcess => 1,
            Category::Truncation => 2,
        };
        self.acc[slot] += start.elapsed().as_secs_f64();
        out
    }

    fn take(&mut self) -> [f64; 3] {
        std::mem::take(&mut self.acc)
    }
}

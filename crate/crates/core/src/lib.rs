//! Low-rank Krylov solvers for Sylvester equations `A X + X B = C₁ C₂ᵀ`.
//!
//! The factorized CG and BiCGSTAB methods in [`factorized`] keep every iterate
//! as `V · core · Wᵀ`, where `V` and `W` are orthonormal block Krylov bases of
//! `A` and `Bᵀ` and `core` is a small square matrix. All vector operations of
//! the underlying Krylov method become operations on the cores; the only large
//! work is extending the two bases. [`reference`] holds the dense
//! matrix-oriented methods, the truncated low-rank methods and a dense
//! Kronecker oracle used to validate them.

// `!(x > tol)` is used on purpose so that NaN counts as a failed check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod factorized;
pub mod history;
pub mod krylov;
pub mod linalg;
pub mod problems;
pub mod reference;

pub use factorized::{
    factorized_bicgstab, factorized_cg, factorized_cg_lyapunov, true_residual, FactorizedSolution,
};
pub use history::{Category, ConvergenceHistory, IterationRecord, SolveStatus, SolverConfig};
pub use linalg::{DenseMatrix, SparseMatrix};

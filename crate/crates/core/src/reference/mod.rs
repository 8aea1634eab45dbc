//! Baselines: dense matrix-oriented methods, truncated low-rank methods and a
//! dense Kronecker oracle.

mod kron;
pub mod lowrank;
mod matrix_oriented;
mod truncated;

pub use kron::{kron_solve, kron_solve_dense, KRON_DIM_LIMIT};
pub use lowrank::{symmetric_truncate, truncate, LowRankMatrix, SymmetricLowRankMatrix};
pub use matrix_oriented::{
    matrix_oriented_bicgstab, matrix_oriented_cg, DenseSolution, DENSE_ENTRY_LIMIT,
};
pub use truncated::{
    truncated_bicgstab, truncated_cg, LowRankSolution, ResidualVariant, SymmetricLowRankSolution,
    TruncatedBicgstabOptions, TruncatedCgOptions,
};

use crate::history::SolveError;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// `‖C − A X − X B‖ / ‖C‖` for a dense `X`.
pub fn dense_relative_residual(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<f64, SolveError> {
    if c.shape() != x.shape() {
        return Err(crate::linalg::LinalgError::DimensionMismatch {
            op: "dense residual",
            left: c.shape(),
            right: x.shape(),
        }
        .into());
    }
    let op = matrix_oriented::sylvester_dense(a, b, x)?;
    Ok(c.sub(&op).frobenius_norm() / c.frobenius_norm())
}

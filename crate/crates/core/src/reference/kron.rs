//! Dense direct oracle on the Kronecker form `(I ⊗ A + Bᵀ ⊗ I) vec(X) = vec(C)`.

use crate::history::SolveError;
use crate::linalg::{lu_solve, DenseMatrix, LinalgError, SparseMatrix};

/// Largest Kronecker dimension `n·m` accepted by [`kron_solve`].
pub const KRON_DIM_LIMIT: usize = 40_000;

/// Solves `A X + X B = C₁ C₂ᵀ` densely. Only for small problems.
pub fn kron_solve(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
) -> Result<DenseMatrix, SolveError> {
    if c1.ncols() != c2.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "kron_solve right-hand factors",
            left: c1.shape(),
            right: c2.shape(),
        }
        .into());
    }
    kron_solve_dense(a, b, &c1.matmul_t(c2))
}

/// As [`kron_solve`] with an explicit dense right-hand side `C` (n × m).
pub fn kron_solve_dense(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &DenseMatrix,
) -> Result<DenseMatrix, SolveError> {
    let (n, m) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || c.shape() != (n, m) {
        return Err(LinalgError::DimensionMismatch {
            op: "kron_solve",
            left: (n, m),
            right: c.shape(),
        }
        .into());
    }
    let dim = n * m;
    if dim > KRON_DIM_LIMIT {
        return Err(SolveError::TooLarge {
            entries: dim as f64,
            limit: KRON_DIM_LIMIT as f64,
        });
    }
    let mut k = DenseMatrix::zeros(dim, dim);
    // Column-major vec: index of X[i, j] is j·n + i.
    for j in 0..m {
        for (i, l, v) in a.triplets() {
            k[(j * n + i, j * n + l)] += v;
        }
    }
    for (l, j, v) in b.triplets() {
        // (Bᵀ ⊗ I)[(j, i), (l, i)] = B[l, j]
        for i in 0..n {
            k[(j * n + i, l * n + i)] += v;
        }
    }
    let rhs = DenseMatrix::from_col_major(dim, 1, c.as_slice().to_vec())?;
    let x = lu_solve(&k, &rhs).map_err(|e| match e {
        LinalgError::Singular { .. } => SolveError::SingularOperator,
        other => other.into(),
    })?;
    Ok(DenseMatrix::from_col_major(n, m, x.into_vec())?)
}

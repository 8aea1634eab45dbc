//! Dense and sparse primitives shared by every solver.

mod dense;
mod factor;
mod mm;
pub mod parallel;
mod qr;
mod sparse;

pub(crate) use dense::gemm_into;
pub use dense::DenseMatrix;
pub(crate) use factor::windowed_inner;
pub use factor::{
    frobenius_inner, lu_solve, orthogonality_error, qr_economy, qr_r, singular_values, svd,
    symmetric_eigen, thin_qr, Svd, SymmetricEigen,
};
pub use mm::{
    parse_matrix_market, read_dense, read_matrix_market, read_sparse, write_dense,
    write_matrix_market, write_sparse, MatrixMarket,
};
pub use qr::HouseholderQr;
pub use sparse::{spmm, spmm_transpose, SparseMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),
    #[error("matrix is numerically singular (pivot {min_pivot:e} vs largest {max_pivot:e})")]
    Singular { min_pivot: f64, max_pivot: f64 },
    #[error("Matrix Market parse error at line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

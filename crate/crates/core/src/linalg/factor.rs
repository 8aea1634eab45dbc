//! Dense factorizations: Householder QR, SVD, symmetric eigendecomposition and LU.
//!
//! QR is implemented here so the sign convention is fixed (nonnegative diagonal
//! of R). SVD, eigen and LU are delegated to faer on small dense matrices.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use super::qr::HouseholderQr;
use super::{DenseMatrix, LinalgError};

/// Frobenius inner product `tr(Xᵀ Y)`.
pub fn frobenius_inner(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64, LinalgError> {
    if x.shape() != y.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "frobenius_inner",
            left: x.shape(),
            right: y.shape(),
        });
    }
    Ok(x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| a * b)
        .sum())
}

/// Inner product of `x` with the upper-left `x.shape()` window of `y`.
pub(crate) fn windowed_inner(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    assert!(
        x.nrows() <= y.nrows() && x.ncols() <= y.ncols(),
        "window exceeds matrix"
    );
    (0..x.ncols())
        .map(|j| {
            x.col(j)
                .iter()
                .zip(&y.col(j)[..x.nrows()])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .sum()
}

/// Economy QR of any `n × c` matrix: `Q` is `n × p`, `R` is `p × c` with `p = min(n, c)`.
///
/// The diagonal of `R` is nonnegative. Rank deficiency yields zeros on the
/// diagonal of `R` while `Q` stays orthonormal.
pub fn qr_economy(x: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let qr = HouseholderQr::new(x);
    (qr.q(), qr.into_r())
}

/// The `R` factor of [`qr_economy`] without forming `Q`.
pub fn qr_r(x: &DenseMatrix) -> DenseMatrix {
    HouseholderQr::new(x).into_r()
}

/// Thin QR of a tall matrix (`rows ≥ cols`): `Q` is `n × s` column-orthonormal,
/// `R` is `s × s` upper triangular with nonnegative diagonal.
pub fn thin_qr(x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
    if x.nrows() < x.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "thin_qr (needs rows >= cols)",
            left: x.shape(),
            right: x.shape(),
        });
    }
    Ok(qr_economy(x))
}

/// Thin singular value decomposition `X = U diag(σ) Vᵀ`, σ nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

fn to_faer(x: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(x: &DenseMatrix) -> Svd {
    let (n, c) = x.shape();
    let p = n.min(c);
    if p == 0 {
        return Svd {
            u: DenseMatrix::zeros(n, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(c, 0),
        };
    }
    let dec = to_faer(x).thin_svd().expect("SVD of a finite matrix");
    let sv = dec.S().column_vector();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let (u, v) = (dec.U(), dec.V());
    Svd {
        u: DenseMatrix::from_fn(n, p, |i, j| u[(i, order[j])]),
        sigma: order.iter().map(|&i| sv[i].max(0.0)).collect(),
        v: DenseMatrix::from_fn(c, p, |i, j| v[(i, order[j])]),
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(x: &DenseMatrix) -> Vec<f64> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Vec::new();
    }
    let mut s = to_faer(x)
        .singular_values()
        .expect("SVD of a finite matrix");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigendecomposition of a symmetric matrix, eigenpairs sorted by decreasing `|λ|`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

pub fn symmetric_eigen(x: &DenseMatrix) -> SymmetricEigen {
    assert!(x.is_square(), "symmetric_eigen needs a square matrix");
    let n = x.nrows();
    if n == 0 {
        return SymmetricEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        };
    }
    let dec = to_faer(&x.symmetrized())
        .self_adjoint_eigen(Side::Lower)
        .expect("eigendecomposition of a finite matrix");
    let ev = dec.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ev[b].abs().total_cmp(&ev[a].abs()).then(a.cmp(&b)));
    let u = dec.U();
    SymmetricEigen {
        values: order.iter().map(|&i| ev[i]).collect(),
        vectors: DenseMatrix::from_fn(n, n, |i, j| u[(i, order[j])]),
    }
}

/// Solves `M x = b` by LU with partial pivoting.
///
/// Reports [`LinalgError::Singular`] when a pivot is below `n·ε·max|pivot|`.
pub fn lu_solve(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if !m.is_square() || m.nrows() != b.nrows() {
        return Err(LinalgError::DimensionMismatch {
            op: "lu_solve",
            left: m.shape(),
            right: b.shape(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(b.clone());
    }
    let lu = to_faer(m).partial_piv_lu();
    let u = lu.U();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let max_pivot = pivots.iter().copied().fold(0.0, f64::max);
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max_pivot > 0.0) || !(min_pivot > n as f64 * f64::EPSILON * max_pivot) {
        return Err(LinalgError::Singular {
            min_pivot,
            max_pivot,
        });
    }
    let x = lu.solve(to_faer(b));
    Ok(from_faer(x.as_ref()))
}

/// `‖QᵀQ − I‖_F`.
pub fn orthogonality_error(q: &DenseMatrix) -> f64 {
    q.t_matmul(q)
        .sub(&DenseMatrix::identity(q.ncols()))
        .frobenius_norm()
}

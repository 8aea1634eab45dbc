//! Factored low-rank matrices `U S Vᵀ` and symmetric `Z D Zᵀ`, with the
//! truncation operator used by the truncated solvers.

use crate::linalg::{
    frobenius_inner, qr_r, svd, symmetric_eigen, DenseMatrix, HouseholderQr, LinalgError,
    SparseMatrix,
};

/// `U · S · Vᵀ` with `U` (n × p), `S` (p × q), `V` (m × q).
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankMatrix {
    pub u: DenseMatrix,
    pub s: DenseMatrix,
    pub v: DenseMatrix,
    pub u_orthonormal: bool,
    pub v_orthonormal: bool,
}

impl LowRankMatrix {
    pub fn new(u: DenseMatrix, s: DenseMatrix, v: DenseMatrix) -> Result<Self, LinalgError> {
        if s.nrows() != u.ncols() || s.ncols() != v.ncols() {
            return Err(LinalgError::DimensionMismatch {
                op: "low-rank factors U, S, V",
                left: u.shape(),
                right: v.shape(),
            });
        }
        Ok(Self {
            u,
            s,
            v,
            u_orthonormal: false,
            v_orthonormal: false,
        })
    }

    /// `C₁ C₂ᵀ` with an identity core.
    pub fn from_outer(c1: &DenseMatrix, c2: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::new(c1.clone(), DenseMatrix::identity(c1.ncols()), c2.clone())
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(n, 0),
            s: DenseMatrix::zeros(0, 0),
            v: DenseMatrix::zeros(m, 0),
            u_orthonormal: true,
            v_orthonormal: true,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// Number of columns of the left factor.
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.u.matmul(&self.s).matmul_t(&self.v)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            s: self.s.scaled(alpha),
            ..self.clone()
        }
    }

    /// `alpha · self + beta · other` by stacking factors.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op: "low-rank addition",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Self::new(
            DenseMatrix::hstack(&[&self.u, &other.u]),
            DenseMatrix::block_diag(&[&self.s.scaled(alpha), &other.s.scaled(beta)]),
            DenseMatrix::hstack(&[&self.v, &other.v]),
        )
    }

    /// `tr(S₁ᵀ (U₁ᵀU₂) S₂ (V₂ᵀV₁))`.
    pub fn inner(&self, other: &Self) -> Result<f64, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op: "low-rank inner product",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let left = self.u.t_matmul(&other.u).matmul(&other.s);
        let right = other.v.t_matmul(&self.v);
        // tr(S₁ᵀ · L · R) = ⟨S₁, L · R⟩
        frobenius_inner(&self.s, &left.matmul(&right))
    }

    /// Frobenius norm computed from orthogonalized factors.
    pub fn norm(&self) -> f64 {
        if self.u_orthonormal && self.v_orthonormal {
            return self.s.frobenius_norm();
        }
        let ru = qr_r(&self.u);
        let rv = qr_r(&self.v);
        ru.matmul(&self.s).matmul_t(&rv).frobenius_norm()
    }

    /// `A M + M B = [A U, U] · diag(S, S) · [V, Bᵀ V]ᵀ`.
    pub fn sylvester(&self, a: &SparseMatrix, b: &SparseMatrix) -> Result<Self, LinalgError> {
        let au = a.spmm(&self.u)?;
        let btv = b.spmm_transpose(&self.v)?;
        Self::new(
            DenseMatrix::hstack(&[&au, &self.u]),
            DenseMatrix::block_diag(&[&self.s, &self.s]),
            DenseMatrix::hstack(&[&self.v, &btv]),
        )
    }
}

/// `Z · D · Zᵀ` with symmetric (possibly indefinite) `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricLowRankMatrix {
    pub z: DenseMatrix,
    pub d: DenseMatrix,
    pub orthonormal: bool,
}

impl SymmetricLowRankMatrix {
    pub fn new(z: DenseMatrix, d: DenseMatrix) -> Result<Self, LinalgError> {
        if !d.is_square() || d.nrows() != z.ncols() {
            return Err(LinalgError::DimensionMismatch {
                op: "symmetric low-rank factors Z, D",
                left: z.shape(),
                right: d.shape(),
            });
        }
        Ok(Self {
            z,
            d,
            orthonormal: false,
        })
    }

    /// `C Cᵀ`.
    pub fn from_factor(c: &DenseMatrix) -> Self {
        Self {
            z: c.clone(),
            d: DenseMatrix::identity(c.ncols()),
            orthonormal: false,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            z: DenseMatrix::zeros(n, 0),
            d: DenseMatrix::zeros(0, 0),
            orthonormal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.z.matmul(&self.d).matmul_t(&self.z)
    }

    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                op: "symmetric low-rank addition",
                left: self.z.shape(),
                right: other.z.shape(),
            });
        }
        Self::new(
            DenseMatrix::hstack(&[&self.z, &other.z]),
            DenseMatrix::block_diag(&[&self.d.scaled(alpha), &other.d.scaled(beta)]),
        )
    }

    pub fn inner(&self, other: &Self) -> Result<f64, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                op: "symmetric low-rank inner product",
                left: self.z.shape(),
                right: other.z.shape(),
            });
        }
        let g = self.z.t_matmul(&other.z);
        let left = g.matmul(&other.d);
        frobenius_inner(&self.d, &left.matmul_t(&g))
    }

    pub fn norm(&self) -> f64 {
        if self.orthonormal {
            return self.d.frobenius_norm();
        }
        let r = qr_r(&self.z);
        r.matmul(&self.d).matmul_t(&r).frobenius_norm()
    }

    /// `A M + M Aᵀ = [A Z, Z] · [[0, D], [D, 0]] · [A Z, Z]ᵀ`.
    pub fn lyapunov(&self, a: &SparseMatrix) -> Result<Self, LinalgError> {
        let az = a.spmm(&self.z)?;
        let r = self.rank();
        let mut d = DenseMatrix::zeros(2 * r, 2 * r);
        d.set_block(0, r, &self.d);
        d.set_block(r, 0, &self.d);
        Self::new(DenseMatrix::hstack(&[&az, &self.z]), d)
    }
}

fn keep_count(values: &[f64], eps: f64, max_rank: Option<usize>) -> usize {
    let lead = values.first().map_or(0.0, |v| v.abs());
    let kept = values
        .iter()
        .take_while(|v| v.abs() > 0.0 && v.abs() >= eps * lead)
        .count();
    max_rank.map_or(kept, |m| kept.min(m))
}

/// Recompression: orthogonalize both factors, take the SVD of the small core,
/// and drop singular values below `eps · σ₁` (and beyond `max_rank`).
pub fn truncate(m: &LowRankMatrix, eps: f64, max_rank: Option<usize>) -> LowRankMatrix {
    let qu = HouseholderQr::new(&m.u);
    let qv = HouseholderQr::new(&m.v);
    let core = qu.r().matmul(&m.s).matmul_t(qv.r());
    let dec = svd(&core);
    let k = keep_count(&dec.sigma, eps, max_rank);
    LowRankMatrix {
        u: qu.apply_q(&dec.u.columns(0, k)),
        s: DenseMatrix::from_diagonal(&dec.sigma[..k]),
        v: qv.apply_q(&dec.v.columns(0, k)),
        u_orthonormal: true,
        v_orthonormal: true,
    }
}

/// Symmetric recompression via an eigendecomposition of the small core;
/// eigenvalues with `|λ| < eps · |λ₁|` are dropped.
pub fn symmetric_truncate(
    m: &SymmetricLowRankMatrix,
    eps: f64,
    max_rank: Option<usize>,
) -> SymmetricLowRankMatrix {
    let q = HouseholderQr::new(&m.z);
    let core = q.r().matmul(&m.d).matmul_t(q.r()).symmetrized();
    let eig = symmetric_eigen(&core);
    let k = keep_count(&eig.values, eps, max_rank);
    SymmetricLowRankMatrix {
        z: q.apply_q(&eig.vectors.columns(0, k)),
        d: DenseMatrix::from_diagonal(&eig.values[..k]),
        orthonormal: true,
    }
}

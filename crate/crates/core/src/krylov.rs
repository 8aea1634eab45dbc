//! Incremental block Arnoldi / block Lanczos processes.
//!
//! A [`BlockKrylovBasis`] holds an orthonormal basis `V = [V₁, …, V_{k+1}]` of the
//! block Krylov space generated by a sparse operator (or its transpose) from a
//! start block, together with the block upper Hessenberg matrix `H` satisfying
//! `op · V_k = V_{k+1} · H_{k+1,k}`.
//!
//! Arnoldi mode orthogonalizes every new block against all previous blocks with
//! two block modified Gram–Schmidt passes. Lanczos mode only uses the two most
//! recent blocks (three-term recurrence) unless full reorthogonalization is
//! switched on; in that case corrections outside the band are not stored, so
//! `H` stays block tridiagonal.

use thiserror::Error;

use crate::linalg::{
    gemm_into, singular_values, svd, thin_qr, DenseMatrix, LinalgError, SparseMatrix,
};

/// Relative rank threshold for the start block.
pub const START_RANK_TOL: f64 = 1e-12;

/// Extra orthogonalization sweep when `σ_min` of the new block falls below
/// this fraction of `‖op·V_k‖`.
const CANCELLATION_RATIO: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovMode {
    Arnoldi,
    Lanczos,
}

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("start block is rank deficient (smallest singular value {sigma_min:e}, largest {sigma_max:e})")]
    RankDeficientStart { sigma_min: f64, sigma_max: f64 },
    #[error("block Krylov breakdown at step {step}: smallest singular value {sigma_min:e} below {threshold:e}")]
    Breakdown {
        step: usize,
        sigma_min: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    pub mode: KrylovMode,
    /// Apply the operator transposed (`Bᵀ` for the right-hand basis).
    pub transpose: bool,
    pub breakdown_tol: f64,
    /// Lanczos only: orthogonalize against every stored block on each step.
    pub full_reorthogonalization: bool,
}

impl BasisOptions {
    pub fn new(mode: KrylovMode) -> Self {
        Self {
            mode,
            transpose: false,
            breakdown_tol: 1e-12,
            full_reorthogonalization: false,
        }
    }

    pub fn transposed(mut self, transpose: bool) -> Self {
        self.transpose = transpose;
        self
    }

    pub fn with_breakdown_tol(mut self, tol: f64) -> Self {
        self.breakdown_tol = tol;
        self
    }

    pub fn with_full_reorthogonalization(mut self, on: bool) -> Self {
        self.full_reorthogonalization = on;
        self
    }
}

/// What a tolerant extension did with the new block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    /// Full-rank block appended.
    Full,
    /// Some directions were numerically dependent; `dropped` columns of the new
    /// block are zero and the matching rows of the subdiagonal block vanish.
    ZeroPadded { dropped: usize },
}

#[derive(Clone, Debug)]
pub struct BlockKrylovBasis<'a> {
    op: &'a SparseMatrix,
    opts: BasisOptions,
    block_size: usize,
    v: DenseMatrix,
    h: DenseMatrix,
    h_norm_sq: f64,
    live: Vec<bool>,
}

/// Builds the first block from the thin QR of `start`; returns the basis and `R`.
pub fn basis_init<'a>(
    op: &'a SparseMatrix,
    start: &DenseMatrix,
    opts: BasisOptions,
) -> Result<(BlockKrylovBasis<'a>, DenseMatrix), KrylovError> {
    BlockKrylovBasis::new(op, start, opts)
}

impl<'a> BlockKrylovBasis<'a> {
    pub fn new(
        op: &'a SparseMatrix,
        start: &DenseMatrix,
        opts: BasisOptions,
    ) -> Result<(Self, DenseMatrix), KrylovError> {
        let n = op.nrows();
        if !op.is_square() || start.nrows() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "basis_init",
                left: (op.nrows(), op.ncols()),
                right: start.shape(),
            }
            .into());
        }
        let s = start.ncols();
        if s == 0 || s > n {
            return Err(LinalgError::DimensionMismatch {
                op: "basis_init (block size must satisfy 1 <= s <= n)",
                left: (n, n),
                right: start.shape(),
            }
            .into());
        }
        let sv = singular_values(start);
        let (sigma_max, sigma_min) = (sv[0], sv[s - 1]);
        if !(sigma_max > 0.0) || sigma_min < START_RANK_TOL * sigma_max {
            return Err(KrylovError::RankDeficientStart {
                sigma_min,
                sigma_max,
            });
        }
        let (q, r) = thin_qr(start)?;
        Ok((
            Self {
                op,
                opts,
                block_size: s,
                v: q,
                h: DenseMatrix::zeros(s, 0),
                h_norm_sq: 0.0,
                live: vec![true; s],
            },
            r,
        ))
    }

    pub fn mode(&self) -> KrylovMode {
        self.opts.mode
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    /// Number of stored basis blocks (`k + 1` after `k` extensions).
    pub fn num_blocks(&self) -> usize {
        self.v.ncols() / self.block_size
    }

    /// Completed extension steps.
    pub fn steps(&self) -> usize {
        self.num_blocks() - 1
    }

    /// All basis columns, `n × num_blocks·s`.
    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// The leading `blocks` basis blocks.
    pub fn leading(&self, blocks: usize) -> DenseMatrix {
        self.v.columns(0, blocks * self.block_size)
    }

    pub fn block(&self, i: usize) -> DenseMatrix {
        self.v.columns(i * self.block_size, self.block_size)
    }

    /// Full recurrence matrix, `num_blocks·s × steps·s`.
    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    /// Leading `(j+1)s × js` section `H_{j+1,j}`; needs `j ≤ steps()`.
    pub fn hessenberg(&self, j: usize) -> DenseMatrix {
        assert!(
            j <= self.steps(),
            "hessenberg({j}) beyond {} steps",
            self.steps()
        );
        let s = self.block_size;
        self.h.submatrix(0, 0, (j + 1) * s, j * s)
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq.sqrt()
    }

    /// Columns that carry a basis vector (false for zero padding).
    pub fn live_columns(&self) -> &[bool] {
        &self.live
    }

    pub fn has_padding(&self) -> bool {
        self.live.iter().any(|l| !l)
    }

    /// Whether `H` only has nonzero blocks on the three central block diagonals.
    pub fn is_block_tridiagonal(&self) -> bool {
        self.opts.mode == KrylovMode::Lanczos
    }

    fn apply_op(&self, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.opts.transpose {
            self.op.spmm_transpose(x)
        } else {
            self.op.spmm(x)
        }
    }

    /// One block MGS sweep over `blocks`, accumulating coefficients into `coef`
    /// for blocks inside `keep`.
    fn mgs_pass(
        &self,
        w: &mut DenseMatrix,
        coef: &mut DenseMatrix,
        blocks: std::ops::Range<usize>,
        keep: std::ops::Range<usize>,
    ) {
        let s = self.block_size;
        for i in blocks {
            let vi = self.v.sub_view(0, i * s, self.v.nrows(), s);
            let mut c = DenseMatrix::zeros(s, s);
            gemm_into(&mut c, 0, 0, 1.0, vi.t(), w.view(), 0.0);
            gemm_into(w, 0, 0, -1.0, vi, c.view(), 1.0);
            if keep.contains(&i) {
                let mut dst = coef.submatrix(i * s, 0, s, s);
                dst.axpy(1.0, &c);
                coef.set_block(i * s, 0, &dst);
            }
        }
    }

    /// Orthogonalized next block and its coefficient column, before normalization.
    fn next_direction(&self) -> Result<(DenseMatrix, DenseMatrix), KrylovError> {
        let s = self.block_size;
        let nb = self.num_blocks();
        let last = self.block(nb - 1);
        let mut w = self.apply_op(&last)?;
        let mut coef = DenseMatrix::zeros((nb + 1) * s, s);
        match self.opts.mode {
            KrylovMode::Arnoldi => {
                self.mgs_pass(&mut w, &mut coef, 0..nb, 0..nb);
                self.mgs_pass(&mut w, &mut coef, 0..nb, 0..nb);
            }
            KrylovMode::Lanczos => {
                let band = nb.saturating_sub(2)..nb;
                self.mgs_pass(&mut w, &mut coef, band.clone(), band.clone());
                if self.opts.full_reorthogonalization {
                    self.mgs_pass(&mut w, &mut coef, 0..nb, band);
                }
            }
        }
        Ok((w, coef))
    }

    fn push(
        &mut self,
        new_block: DenseMatrix,
        mut coef: DenseMatrix,
        sub: DenseMatrix,
        live: &[bool],
    ) {
        let s = self.block_size;
        let nb = self.num_blocks();
        coef.set_block(nb * s, 0, &sub);
        self.h_norm_sq += coef.frobenius_norm().powi(2);
        let mut h = DenseMatrix::zeros((nb + 1) * s, nb * s);
        h.set_block(0, 0, &self.h);
        h.set_block(0, (nb - 1) * s, &coef);
        self.h = h;
        self.v.append_columns(&new_block);
        self.live.extend_from_slice(live);
    }

    /// Orthogonalized and normalized candidate block `(q, r, coef)`.
    ///
    /// A further sweep over the stored blocks is made when the candidate lost
    /// most of its norm to cancellation.
    fn candidate(&self) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix), KrylovError> {
        let (mut w, mut coef) = self.next_direction()?;
        let (mut q, mut r) = thin_qr(&w)?;
        let before = (coef.frobenius_norm().powi(2) + r.frobenius_norm().powi(2)).sqrt();
        let sigma_min = *singular_values(&r).last().unwrap();
        if sigma_min < CANCELLATION_RATIO * before {
            let nb = self.num_blocks();
            let sweep = match self.opts.mode {
                KrylovMode::Arnoldi => 0..nb,
                KrylovMode::Lanczos if self.opts.full_reorthogonalization => 0..nb,
                KrylovMode::Lanczos => nb.saturating_sub(2)..nb,
            };
            let keep = match self.opts.mode {
                KrylovMode::Arnoldi => 0..nb,
                KrylovMode::Lanczos => nb.saturating_sub(2)..nb,
            };
            self.mgs_pass(&mut w, &mut coef, sweep, keep);
            (q, r) = thin_qr(&w)?;
        }
        Ok((q, r, coef))
    }

    /// Advances the process by one block.
    ///
    /// Fails with [`KrylovError::Breakdown`] when the new block is numerically
    /// rank deficient; the basis is then left unchanged.
    pub fn extend(&mut self) -> Result<(), KrylovError> {
        let (q, r, coef) = self.candidate()?;
        let threshold = self.threshold(&coef, &r);
        let sigma_min = *singular_values(&r).last().unwrap();
        if !(sigma_min >= threshold) {
            return Err(KrylovError::Breakdown {
                step: self.steps() + 1,
                sigma_min,
                threshold,
            });
        }
        let live = vec![true; self.block_size];
        self.push(q, coef, r, &live);
        Ok(())
    }

    /// Advances by one block, replacing numerically dependent directions with
    /// zero columns instead of failing.
    ///
    /// The recurrence still holds with the padded block, and every later block
    /// keeps zeros in those positions, so small matrices built on top of the
    /// basis keep exact zero rows and columns there.
    pub fn extend_padded(&mut self) -> Result<Extension, KrylovError> {
        let s = self.block_size;
        let (q, r, coef) = self.candidate()?;
        let threshold = self.threshold(&coef, &r);
        let sigma_min = *singular_values(&r).last().unwrap();
        if sigma_min >= threshold {
            self.push(q, coef, r, &vec![true; s]);
            return Ok(Extension::Full);
        }
        // r = U Σ Yᵀ, so w = (qU) Σ Yᵀ; keep directions with σ above threshold.
        let dec = svd(&r);
        let mut block = q.matmul(&dec.u);
        let mut sub = DenseMatrix::zeros(s, s);
        let mut live = vec![false; s];
        for i in 0..s {
            if dec.sigma[i] >= threshold && dec.sigma[i] > 0.0 {
                live[i] = true;
                for c in 0..s {
                    sub[(i, c)] = dec.sigma[i] * dec.v[(c, i)];
                }
            } else {
                block.col_mut(i).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let dropped = live.iter().filter(|l| !**l).count();
        self.push(block, coef, sub, &live);
        Ok(Extension::ZeroPadded { dropped })
    }

    fn threshold(&self, coef: &DenseMatrix, r: &DenseMatrix) -> f64 {
        let norm =
            (self.h_norm_sq + coef.frobenius_norm().powi(2) + r.frobenius_norm().powi(2)).sqrt();
        self.opts.breakdown_tol * norm
    }

    /// `‖op·V_k − V_{k+1} H‖_F` for the current state.
    pub fn recurrence_residual(&self) -> Result<f64, LinalgError> {
        let k = self.steps();
        if k == 0 {
            return Ok(0.0);
        }
        let vk = self.leading(k);
        let lhs = self.apply_op(&vk)?;
        Ok(lhs.sub(&self.v.matmul(&self.h)).frobenius_norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonality_error;
    use crate::problems::{random_dense, random_nonsymmetric, tridiagonal};

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_col_major(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn init_examples() {
        let a = SparseMatrix::identity(3);
        let (b, r) = basis_init(
            &a,
            &col(&[1.0, 0.0, 0.0]),
            BasisOptions::new(KrylovMode::Arnoldi),
        )
        .unwrap();
        assert_eq!(b.v(), &col(&[1.0, 0.0, 0.0]));
        assert_eq!(r, DenseMatrix::identity(1));
        let (b, r) = basis_init(
            &a,
            &col(&[3.0, 4.0, 0.0]),
            BasisOptions::new(KrylovMode::Arnoldi),
        )
        .unwrap();
        assert!(b.v().sub(&col(&[0.6, 0.8, 0.0])).max_abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_start_is_rejected() {
        let a = SparseMatrix::identity(3);
        let start = DenseMatrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0], &[0.5, 0.5]]);
        assert!(matches!(
            basis_init(&a, &start, BasisOptions::new(KrylovMode::Arnoldi)),
            Err(KrylovError::RankDeficientStart { .. })
        ));
    }

    #[test]
    fn diagonal_two_by_two_step() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 3.0)]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (mut b, _) =
            basis_init(&a, &col(&[h, h]), BasisOptions::new(KrylovMode::Arnoldi)).unwrap();
        b.extend().unwrap();
        assert!((b.h()[(0, 0)] - 2.5).abs() < 1e-14);
        assert!((b.h()[(1, 0)] - 0.5).abs() < 1e-14);
        assert!(b.block(1).sub(&col(&[-h, h])).max_abs() < 1e-14);
    }

    #[test]
    fn identity_operator_breaks_down() {
        let a = SparseMatrix::identity(5);
        let start = random_dense(5, 2, 1);
        for mode in [KrylovMode::Arnoldi, KrylovMode::Lanczos] {
            let (mut b, _) = basis_init(&a, &start, BasisOptions::new(mode)).unwrap();
            assert!(matches!(
                b.extend(),
                Err(KrylovError::Breakdown { step: 1, .. })
            ));
            assert_eq!(b.num_blocks(), 1);
            assert_eq!(
                b.extend_padded().unwrap(),
                Extension::ZeroPadded { dropped: 2 }
            );
            assert_eq!(b.num_blocks(), 2);
            assert_eq!(b.block(1).frobenius_norm(), 0.0);
            assert!(b.recurrence_residual().unwrap() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_recurrence_and_orthogonality() {
        let a = tridiagonal(100, -1.0, 2.0, -1.0);
        let start = random_dense(100, 2, 5);
        for mode in [KrylovMode::Arnoldi, KrylovMode::Lanczos] {
            let (mut b, _) = basis_init(&a, &start, BasisOptions::new(mode)).unwrap();
            for _ in 0..10 {
                b.extend().unwrap();
            }
            assert_eq!(b.h().shape(), (22, 20));
            assert!(b.recurrence_residual().unwrap() <= 1e-12 * b.h_norm());
            assert!(orthogonality_error(b.v()) <= 1e-10 * (22f64).sqrt());
        }
    }

    #[test]
    fn lanczos_h_is_symmetric_block_tridiagonal() {
        let a = tridiagonal(60, -1.0, 2.5, -1.0);
        let (mut b, _) = basis_init(
            &a,
            &random_dense(60, 3, 2),
            BasisOptions::new(KrylovMode::Lanczos),
        )
        .unwrap();
        for _ in 0..6 {
            b.extend().unwrap();
        }
        let square = b.hessenberg(6).submatrix(0, 0, 18, 18);
        assert!(square.sub(&square.transpose()).max_abs() <= 1e-12 * square.max_abs());
        for i in 0..18 {
            for j in 0..18 {
                if i / 3 > j / 3 + 1 || j / 3 > i / 3 + 1 {
                    assert_eq!(square[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn transposed_basis_uses_transpose() {
        let a = random_nonsymmetric(30, 0.2, 4);
        let at = a.transpose();
        let start = random_dense(30, 2, 9);
        let (mut b1, _) = basis_init(
            &a,
            &start,
            BasisOptions::new(KrylovMode::Arnoldi).transposed(true),
        )
        .unwrap();
        let (mut b2, _) = basis_init(&at, &start, BasisOptions::new(KrylovMode::Arnoldi)).unwrap();
        for _ in 0..4 {
            b1.extend().unwrap();
            b2.extend().unwrap();
        }
        assert!(b1.v().sub(b2.v()).max_abs() < 1e-12);
        assert!(b1.h().sub(b2.h()).max_abs() < 1e-12);
    }

    #[test]
    fn padded_extension_exhausts_small_space() {
        let a = random_nonsymmetric(5, 0.6, 3);
        let (mut b, _) = basis_init(
            &a,
            &random_dense(5, 2, 8),
            BasisOptions::new(KrylovMode::Arnoldi),
        )
        .unwrap();
        for _ in 0..4 {
            b.extend_padded().unwrap();
        }
        let live = b.live_columns().iter().filter(|l| **l).count();
        assert_eq!(live, 5);
        assert!(b.recurrence_residual().unwrap() <= 1e-12 * b.h_norm());
        let vtv = b.v().t_matmul(b.v());
        for i in 0..vtv.nrows() {
            let expect = if b.live_columns()[i] { 1.0 } else { 0.0 };
            assert!((vtv[(i, i)] - expect).abs() < 1e-12);
        }
    }
}

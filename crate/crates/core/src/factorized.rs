//! Factorized CG and BiCGSTAB for `A X + X B = C₁ C₂ᵀ`.
//!
//! With a zero initial guess every matrix produced by the matrix-oriented CG
//! or BiCGSTAB recurrences lies in `range(V_j) ⊗ range(W_j)`, where `V_j` and
//! `W_j` are orthonormal bases of the block Krylov spaces of `(A, C₁)` and
//! `(Bᵀ, C₂)`. Writing each iterate as `V_j · core · W_jᵀ` turns
//!
//! * addition into addition of zero-padded cores,
//! * the Frobenius inner product into the inner product of cores,
//! * the Sylvester operator into `[H P, 0] + [P Gᵀ; 0]` on the cores, using
//!   the recurrences `A V_j = V_{j+1} H` and `Bᵀ W_j = W_{j+1} G`.
//!
//! The solvers below therefore only touch `n`-sized data when they extend the
//! two bases. CG uses block Lanczos (one step per iteration); BiCGSTAB uses
//! block Arnoldi (two steps per iteration). Cores grow by `s` (CG) or `2s`
//! (BiCGSTAB) per iteration; nothing is truncated.

use crate::history::{Category, ConvergenceHistory, SolveError, SolveStatus, SolverConfig, Timer};
use crate::krylov::{BasisOptions, BlockKrylovBasis, KrylovMode};
use crate::linalg::{
    frobenius_inner, gemm_into, qr_r, windowed_inner, DenseMatrix, LinalgError, SparseMatrix,
};

/// Symmetry tolerance (relative to the largest entry) required by the CG solvers.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Approximate solution `X ≈ V · core · Wᵀ`.
#[derive(Clone, Debug)]
pub struct FactorizedSolution {
    pub v: DenseMatrix,
    pub core: DenseMatrix,
    pub w: DenseMatrix,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    /// Set when `status` is [`SolveStatus::Breakdown`].
    pub breakdown: Option<String>,
    /// Core dimension before zero-padded basis directions were dropped.
    pub bookkept_rank: usize,
}

impl FactorizedSolution {
    pub fn rank(&self) -> usize {
        self.core.nrows()
    }

    pub fn iterations(&self) -> usize {
        self.history.iterations()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Dense `V · core · Wᵀ`; only for small problems.
    pub fn to_dense(&self) -> DenseMatrix {
        self.v.matmul(&self.core).matmul_t(&self.w)
    }
}

/// Places `m` in the upper-left corner of a `target × target` zero matrix.
pub fn embed(m: &DenseMatrix, target: usize) -> Result<DenseMatrix, SolveError> {
    if !m.is_square() || target < m.nrows() {
        return Err(SolveError::InvalidConfig(format!(
            "cannot embed a {}x{} matrix into {target}x{target}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.padded(target, target))
}

/// `[H·P, 0] + [P·Gᵀ; 0]` for a `js × js` core `P` and `(j+1)s × js` recurrence
/// matrices `H`, `G`.
///
/// If `H` and `G` come from valid basis recurrences, then
/// `A (V P Wᵀ) + (V P Wᵀ) B = V₊ · result · W₊ᵀ`.
pub fn small_sylvester_apply(
    p: &DenseMatrix,
    h: &DenseMatrix,
    g: &DenseMatrix,
) -> Result<DenseMatrix, LinalgError> {
    let r = p.nrows();
    let mismatch = |right: (usize, usize)| LinalgError::DimensionMismatch {
        op: "small_sylvester_apply",
        left: p.shape(),
        right,
    };
    if !p.is_square() || h.ncols() != r || g.ncols() != r {
        return Err(mismatch(h.shape()));
    }
    if h.nrows() < r || h.nrows() != g.nrows() {
        return Err(mismatch(g.shape()));
    }
    let t = h.nrows();
    let mut out = DenseMatrix::zeros(t, t);
    gemm_into(&mut out, 0, 0, 1.0, h.view(), p.view(), 0.0);
    gemm_into(&mut out, 0, 0, 1.0, p.view(), g.view().t(), 1.0);
    Ok(out)
}

/// Core of the Sylvester operator using the block structure of the basis
/// recurrence matrices: column block `c` of a block Hessenberg matrix has
/// nonzero row blocks `0..=c+1`, and only `c-1..=c+1` when block tridiagonal.
/// `h` and `g` may be larger than needed; only their leading sections are read.
fn structured_apply(
    p: &DenseMatrix,
    s: usize,
    h: &DenseMatrix,
    h_tridiagonal: bool,
    g: Option<(&DenseMatrix, bool)>,
) -> DenseMatrix {
    let r = p.nrows();
    let blocks = r / s;
    debug_assert_eq!(blocks * s, r);
    debug_assert!(h.nrows() >= r + s && h.ncols() >= r);
    let mut out = DenseMatrix::zeros(r + s, r + s);
    for c in 0..blocks {
        let lo = if h_tridiagonal {
            c.saturating_sub(1)
        } else {
            0
        };
        let rows = (c + 2 - lo) * s;
        gemm_into(
            &mut out,
            lo * s,
            0,
            1.0,
            h.sub_view(lo * s, c * s, rows, s),
            p.sub_view(c * s, 0, s, r),
            1.0,
        );
    }
    match g {
        None => {
            // Lyapunov: [H P, 0] + [H P, 0]ᵀ when P is symmetric and G = H.
            let t = out.transpose();
            out.axpy(1.0, &t);
        }
        Some((g, g_tridiagonal)) => {
            debug_assert!(g.nrows() >= r + s && g.ncols() >= r);
            for c in 0..blocks {
                let lo = if g_tridiagonal {
                    c.saturating_sub(1)
                } else {
                    0
                };
                let rows = (c + 2 - lo) * s;
                gemm_into(
                    &mut out,
                    0,
                    lo * s,
                    1.0,
                    p.sub_view(0, c * s, r, s),
                    g.sub_view(lo * s, c * s, rows, s).t(),
                    1.0,
                );
            }
        }
    }
    out
}

fn check_rhs(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
) -> Result<(), SolveError> {
    if !a.is_square() || !b.is_square() {
        return Err(LinalgError::DimensionMismatch {
            op: "Sylvester operators must be square",
            left: (a.nrows(), a.ncols()),
            right: (b.nrows(), b.ncols()),
        }
        .into());
    }
    if c1.nrows() != a.nrows() || c2.nrows() != b.nrows() || c1.ncols() != c2.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "right-hand factors C1 (n x s), C2 (m x s)",
            left: c1.shape(),
            right: c2.shape(),
        }
        .into());
    }
    Ok(())
}

fn check_symmetric(m: &SparseMatrix, which: &'static str) -> Result<(), SolveError> {
    if m.is_symmetric(SYMMETRY_TOL) {
        Ok(())
    } else {
        Err(SolveError::NotSymmetric {
            which,
            asymmetry: m.asymmetry(),
        })
    }
}

fn basis_options(mode: KrylovMode, cfg: &SolverConfig) -> BasisOptions {
    BasisOptions::new(mode)
        .with_breakdown_tol(cfg.breakdown_tol)
        .with_full_reorthogonalization(cfg.lanczos_reorthogonalization)
}

/// Keeps the leading `blocks` basis blocks, dropping zero-padded columns and the
/// matching (exactly zero) core rows and columns.
fn assemble(
    left: &BlockKrylovBasis<'_>,
    right: Option<&BlockKrylovBasis<'_>>,
    core: DenseMatrix,
    history: ConvergenceHistory,
    status: SolveStatus,
    breakdown: Option<String>,
) -> FactorizedSolution {
    let s = left.block_size();
    let r = core.nrows();
    let blocks = r / s;
    let right_basis = right.unwrap_or(left);
    let live_l: Vec<usize> = (0..r).filter(|&i| left.live_columns()[i]).collect();
    let live_r: Vec<usize> = (0..r).filter(|&i| right_basis.live_columns()[i]).collect();
    let v_all = left.leading(blocks);
    let w_all = right_basis.leading(blocks);
    let (v, w, core_out) = if live_l.len() == r && live_r.len() == r {
        (v_all, w_all, core)
    } else {
        let v = DenseMatrix::from_fn(v_all.nrows(), live_l.len(), |i, j| v_all[(i, live_l[j])]);
        let w = DenseMatrix::from_fn(w_all.nrows(), live_r.len(), |i, j| w_all[(i, live_r[j])]);
        let c = DenseMatrix::from_fn(live_l.len(), live_r.len(), |i, j| {
            core[(live_l[i], live_r[j])]
        });
        (v, w, c)
    };
    FactorizedSolution {
        v,
        core: core_out,
        w,
        history,
        status,
        breakdown,
        bookkept_rank: r,
    }
}

/// Factorized CG for symmetric positive definite `A`, `B`.
pub fn factorized_cg(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<FactorizedSolution, SolveError> {
    cfg.validate()?;
    check_rhs(a, b, c1, c2)?;
    check_symmetric(a, "A")?;
    check_symmetric(b, "B")?;
    let s = c1.ncols();
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();

    let opts = basis_options(KrylovMode::Lanczos, cfg);
    let (mut vb, r_left) = timer.time(Category::KrylovProcess, || {
        BlockKrylovBasis::new(a, c1, opts)
    })?;
    let (mut wb, r_right) = timer.time(Category::KrylovProcess, || {
        BlockKrylovBasis::new(b, c2, opts.transposed(true))
    })?;

    let mut r = r_left.matmul_t(&r_right);
    let mut p = r.clone();
    let mut x = DenseMatrix::zeros(0, 0);
    let mut rho = frobenius_inner(&r, &r)?;
    let r0_norm = rho.sqrt();
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let limit = cfg.iteration_limit(a.nrows(), b.nrows());
    for k in 0..limit {
        timer.time(Category::KrylovProcess, || -> Result<(), SolveError> {
            while vb.num_blocks() < k + 2 {
                vb.extend_padded()?;
            }
            while wb.num_blocks() < k + 2 {
                wb.extend_padded()?;
            }
            Ok(())
        })?;

        let step = timer.time(Category::BasicOps, || {
            let q = structured_apply(&p, s, vb.h(), true, Some((wb.h(), true)));
            let denom = windowed_inner(&r, &q);
            if !(denom.abs() > cfg.breakdown_tol * res_k * res_k) {
                return Err(format!(
                    "CG pivot <R_k, Q_k> = {denom:e} vanished at iteration {k}"
                ));
            }
            let alpha = rho / denom;
            let mut x_next = x.padded((k + 1) * s, (k + 1) * s);
            x_next.axpy(alpha, &p);
            let mut r_next = r.padded((k + 2) * s, (k + 2) * s);
            r_next.axpy(-alpha, &q);
            let res = r_next.frobenius_norm();
            Ok((x_next, r_next, res))
        });
        let (x_next, r_next, res) = match step {
            Ok(v) => v,
            Err(msg) => {
                return Ok(assemble(
                    &vb,
                    Some(&wb),
                    x,
                    history,
                    SolveStatus::Breakdown,
                    Some(msg),
                ))
            }
        };
        x = x_next;
        r = r_next;
        history.push(k + 1, res / r0_norm, &mut timer);
        res_k = res;
        if res <= r0_norm * cfg.eps_tol {
            return Ok(assemble(
                &vb,
                Some(&wb),
                x,
                history,
                SolveStatus::Converged,
                None,
            ));
        }
        timer.time(Category::BasicOps, || {
            let rho_next = frobenius_inner(&r, &r).expect("square cores");
            let beta = rho_next / rho;
            let mut p_next = r.clone();
            p_next.axpy_block(beta, &p);
            p = p_next;
            rho = rho_next;
        });
    }
    Ok(assemble(
        &vb,
        Some(&wb),
        x,
        history,
        SolveStatus::MaxIter,
        None,
    ))
}

/// Factorized CG for the Lyapunov equation `A X + X Aᵀ = C₁ C₁ᵀ` with SPD `A`.
///
/// Builds a single basis (`W = V`) and keeps every core exactly symmetric.
pub fn factorized_cg_lyapunov(
    a: &SparseMatrix,
    c1: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<FactorizedSolution, SolveError> {
    cfg.validate()?;
    check_rhs(a, a, c1, c1)?;
    check_symmetric(a, "A")?;
    let s = c1.ncols();
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();

    let opts = basis_options(KrylovMode::Lanczos, cfg);
    let (mut vb, r_left) = timer.time(Category::KrylovProcess, || {
        BlockKrylovBasis::new(a, c1, opts)
    })?;

    let mut r = r_left.matmul_t(&r_left).symmetrized();
    let mut p = r.clone();
    let mut x = DenseMatrix::zeros(0, 0);
    let mut rho = frobenius_inner(&r, &r)?;
    let r0_norm = rho.sqrt();
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let n = a.nrows();
    let limit = cfg.iteration_limit(n, n);
    for k in 0..limit {
        timer.time(Category::KrylovProcess, || -> Result<(), SolveError> {
            while vb.num_blocks() < k + 2 {
                vb.extend_padded()?;
            }
            Ok(())
        })?;
        let step = timer.time(Category::BasicOps, || {
            let q = structured_apply(&p, s, vb.h(), true, None);
            let denom = windowed_inner(&r, &q);
            if !(denom.abs() > cfg.breakdown_tol * res_k * res_k) {
                return Err(format!(
                    "CG pivot <R_k, Q_k> = {denom:e} vanished at iteration {k}"
                ));
            }
            let alpha = rho / denom;
            let mut x_next = x.padded((k + 1) * s, (k + 1) * s);
            x_next.axpy(alpha, &p);
            let mut r_next = r.padded((k + 2) * s, (k + 2) * s);
            r_next.axpy(-alpha, &q);
            let res = r_next.frobenius_norm();
            Ok((x_next, r_next, res))
        });
        let (x_next, r_next, res) = match step {
            Ok(v) => v,
            Err(msg) => {
                return Ok(assemble(
                    &vb,
                    None,
                    x,
                    history,
                    SolveStatus::Breakdown,
                    Some(msg),
                ))
            }
        };
        x = x_next;
        r = r_next;
        history.push(k + 1, res / r0_norm, &mut timer);
        res_k = res;
        if res <= r0_norm * cfg.eps_tol {
            return Ok(assemble(
                &vb,
                None,
                x,
                history,
                SolveStatus::Converged,
                None,
            ));
        }
        timer.time(Category::BasicOps, || {
            let rho_next = frobenius_inner(&r, &r).expect("square cores");
            let beta = rho_next / rho;
            let mut p_next = r.clone();
            p_next.axpy_block(beta, &p);
            p = p_next;
            rho = rho_next;
        });
    }
    Ok(assemble(&vb, None, x, history, SolveStatus::MaxIter, None))
}

/// Factorized BiCGSTAB for general square `A`, `B`, with shadow residual `R̃₀ = R₀`.
pub fn factorized_bicgstab(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<FactorizedSolution, SolveError> {
    cfg.validate()?;
    check_rhs(a, b, c1, c2)?;
    let s = c1.ncols();
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();

    let opts = basis_options(KrylovMode::Arnoldi, cfg);
    let (mut vb, r_left) = timer.time(Category::KrylovProcess, || {
        BlockKrylovBasis::new(a, c1, opts)
    })?;
    let (mut wb, r_right) = timer.time(Category::KrylovProcess, || {
        BlockKrylovBasis::new(b, c2, opts.transposed(true))
    })?;

    let mut r = r_left.matmul_t(&r_right);
    let shadow = r.clone();
    let mut p = r.clone();
    let mut x = DenseMatrix::zeros(0, 0);
    let mut rho = frobenius_inner(&shadow, &r)?;
    let r0_norm = r.frobenius_norm();
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let grow = |vb: &mut BlockKrylovBasis<'_>,
                wb: &mut BlockKrylovBasis<'_>,
                blocks: usize,
                timer: &mut Timer| {
        timer.time(Category::KrylovProcess, || -> Result<(), SolveError> {
            while vb.num_blocks() < blocks {
                vb.extend_padded()?;
            }
            while wb.num_blocks() < blocks {
                wb.extend_padded()?;
            }
            Ok(())
        })
    };

    let limit = cfg.iteration_limit(a.nrows(), b.nrows());
    for k in 0..limit {
        let dim_r = (2 * k + 1) * s;
        grow(&mut vb, &mut wb, 2 * k + 2, &mut timer)?;
        let first = timer.time(Category::BasicOps, || {
            let q = structured_apply(&p, s, vb.h(), false, Some((wb.h(), false)));
            let pivot = windowed_inner(&shadow, &q);
            if !(pivot.abs() > cfg.breakdown_tol * r0_norm * res_k) {
                return Err(format!(
                    "BiCGSTAB pivot <R~0, Q_k> = {pivot:e} vanished at iteration {k}"
                ));
            }
            let alpha = rho / pivot;
            let mut s_k = r.padded(dim_r + s, dim_r + s);
            s_k.axpy(-alpha, &q);
            Ok((q, alpha, s_k))
        });
        let (q, alpha, s_k) = match first {
            Ok(v) => v,
            Err(msg) => {
                return Ok(assemble(
                    &vb,
                    Some(&wb),
                    x,
                    history,
                    SolveStatus::Breakdown,
                    Some(msg),
                ))
            }
        };
        let s_norm = timer.time(Category::BasicOps, || s_k.frobenius_norm());
        if s_norm <= r0_norm * cfg.eps_tol {
            // Converged after the half step: X + αP.
            let mut x_half = x.padded(dim_r + s, dim_r + s);
            x_half.axpy_block(alpha, &p);
            history.push(k + 1, s_norm / r0_norm, &mut timer);
            return Ok(assemble(
                &vb,
                Some(&wb),
                x_half,
                history,
                SolveStatus::Converged,
                None,
            ));
        }

        grow(&mut vb, &mut wb, 2 * k + 3, &mut timer)?;
        let second = timer.time(Category::BasicOps, || {
            let t = structured_apply(&s_k, s, vb.h(), false, Some((wb.h(), false)));
            let tt = frobenius_inner(&t, &t).expect("square cores");
            if !(tt.sqrt() > cfg.breakdown_tol * s_norm) {
                return Err(format!(
                    "BiCGSTAB <T_k, T_k> = {tt:e} vanished at iteration {k}"
                ));
            }
            let omega = windowed_inner(&s_k, &t) / tt;
            if omega == 0.0 || !omega.is_finite() {
                return Err(format!("BiCGSTAB omega = {omega:e} at iteration {k}"));
            }
            let mut x_next = x.padded(dim_r + s, dim_r + s);
            x_next.axpy_block(alpha, &p);
            x_next.axpy(omega, &s_k);
            let mut r_next = s_k.padded(dim_r + 2 * s, dim_r + 2 * s);
            r_next.axpy(-omega, &t);
            let res = r_next.frobenius_norm();
            Ok((x_next, r_next, omega, res))
        });
        let (x_next, r_next, omega, res) = match second {
            Ok(v) => v,
            Err(msg) => {
                return Ok(assemble(
                    &vb,
                    Some(&wb),
                    x,
                    history,
                    SolveStatus::Breakdown,
                    Some(msg),
                ))
            }
        };
        x = x_next;
        r = r_next;
        history.push(k + 1, res / r0_norm, &mut timer);
        res_k = res;
        if res <= r0_norm * cfg.eps_tol {
            return Ok(assemble(
                &vb,
                Some(&wb),
                x,
                history,
                SolveStatus::Converged,
                None,
            ));
        }
        let rho_next = timer.time(Category::BasicOps, || windowed_inner(&shadow, &r));
        if !(rho_next.abs() > cfg.breakdown_tol * r0_norm * res) {
            let msg = format!(
                "BiCGSTAB rho = {rho_next:e} vanished at iteration {}",
                k + 1
            );
            return Ok(assemble(
                &vb,
                Some(&wb),
                x,
                history,
                SolveStatus::Breakdown,
                Some(msg),
            ));
        }
        timer.time(Category::BasicOps, || {
            let beta = (alpha / omega) * (rho_next / rho);
            let dim = dim_r + 2 * s;
            let mut dir = p.padded(dim, dim);
            dir.axpy_block(-omega, &q);
            let mut p_next = r.clone();
            p_next.axpy(beta, &dir);
            p = p_next;
            rho = rho_next;
        });
    }
    Ok(assemble(
        &vb,
        Some(&wb),
        x,
        history,
        SolveStatus::MaxIter,
        None,
    ))
}

/// `(‖C₁C₂ᵀ − A X − X B‖, ‖C₁C₂ᵀ‖)` for `X = U · S · Vᵀ`, without forming `X`.
///
/// The residual is `[C₁, A U, U] · diag(I, −S, −S) · [C₂, V, Bᵀ V]ᵀ`; both outer
/// factors are orthogonalized and the norm is taken of the small middle factor.
pub fn lowrank_residual(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    u: &DenseMatrix,
    core: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<(f64, f64), SolveError> {
    check_rhs(a, b, c1, c2)?;
    if u.nrows() != a.nrows() || v.nrows() != b.nrows() || core.shape() != (u.ncols(), v.ncols()) {
        return Err(LinalgError::DimensionMismatch {
            op: "low-rank residual factors",
            left: (u.nrows(), u.ncols()),
            right: (v.nrows(), v.ncols()),
        }
        .into());
    }
    let rc1 = qr_r(c1);
    let rc2 = qr_r(c2);
    let rhs_norm = rc1.matmul_t(&rc2).frobenius_norm();

    let au = a.spmm(u)?;
    let btv = b.spmm_transpose(v)?;
    let left = DenseMatrix::hstack(&[c1, &au, u]);
    let right = DenseMatrix::hstack(&[c2, v, &btv]);
    let neg = core.scaled(-1.0);
    let middle = DenseMatrix::block_diag(&[&DenseMatrix::identity(c1.ncols()), &neg, &neg]);
    let rl = qr_r(&left);
    let rr = qr_r(&right);
    let res = rl.matmul(&middle).matmul_t(&rr).frobenius_norm();
    Ok((res, rhs_norm))
}

/// True relative residual `‖C₁C₂ᵀ − A X − X B‖ / ‖C₁C₂ᵀ‖` of a factorized solution.
pub fn true_residual(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    sol: &FactorizedSolution,
) -> Result<f64, SolveError> {
    let (res, rhs) = lowrank_residual(a, b, c1, c2, &sol.v, &sol.core, &sol.w)?;
    Ok(res / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::basis_init;
    use crate::problems::{laplacian_2d, random_dense, random_nonsymmetric, random_spd};

    fn dense_residual(
        a: &SparseMatrix,
        b: &SparseMatrix,
        c1: &DenseMatrix,
        c2: &DenseMatrix,
        x: &DenseMatrix,
    ) -> f64 {
        let c = c1.matmul_t(c2);
        let ax = a.to_dense().matmul(x);
        let xb = x.matmul(&b.to_dense());
        c.sub(&ax).sub(&xb).frobenius_norm() / c.frobenius_norm()
    }

    #[test]
    fn embed_examples() {
        let m = DenseMatrix::from_rows(&[&[3.5]]);
        assert_eq!(
            embed(&m, 2).unwrap(),
            DenseMatrix::from_rows(&[&[3.5, 0.0], &[0.0, 0.0]])
        );
        let m = random_dense(3, 3, 1);
        assert_eq!(embed(&m, 3).unwrap(), m);
        assert_eq!(embed(&m, 7).unwrap().frobenius_norm(), m.frobenius_norm());
        assert!(embed(&m, 2).is_err());
    }

    #[test]
    fn small_apply_scalar_expansion() {
        let (p, h1, h2, g1, g2) = (1.5, 2.0, -0.5, 0.25, 3.0);
        let out = small_sylvester_apply(
            &DenseMatrix::from_rows(&[&[p]]),
            &DenseMatrix::from_rows(&[&[h1], &[h2]]),
            &DenseMatrix::from_rows(&[&[g1], &[g2]]),
        )
        .unwrap();
        let expect = DenseMatrix::from_rows(&[&[h1 * p + p * g1, p * g2], &[h2 * p, 0.0]]);
        assert_eq!(out, expect);
        let zero = small_sylvester_apply(
            &DenseMatrix::zeros(1, 1),
            &DenseMatrix::from_rows(&[&[h1], &[h2]]),
            &DenseMatrix::from_rows(&[&[g1], &[g2]]),
        )
        .unwrap();
        assert_eq!(zero.frobenius_norm(), 0.0);
        assert!(small_sylvester_apply(
            &DenseMatrix::zeros(2, 2),
            &DenseMatrix::zeros(3, 1),
            &DenseMatrix::zeros(3, 1)
        )
        .is_err());
    }

    #[test]
    fn small_apply_matches_dense_lift() {
        let (n, s, j) = (30, 2, 3);
        let a = random_nonsymmetric(n, 0.2, 1);
        let b = random_nonsymmetric(n, 0.2, 2);
        let (mut vb, _) = basis_init(
            &a,
            &random_dense(n, s, 3),
            BasisOptions::new(KrylovMode::Arnoldi),
        )
        .unwrap();
        let (mut wb, _) = basis_init(
            &b,
            &random_dense(n, s, 4),
            BasisOptions::new(KrylovMode::Arnoldi).transposed(true),
        )
        .unwrap();
        for _ in 0..j {
            vb.extend().unwrap();
            wb.extend().unwrap();
        }
        let p = random_dense(j * s, j * s, 5);
        let core = small_sylvester_apply(&p, &vb.hessenberg(j), &wb.hessenberg(j)).unwrap();
        let structured = structured_apply(&p, s, vb.h(), false, Some((wb.h(), false)));
        assert!(core.sub(&structured).max_abs() <= 1e-14 * core.max_abs());

        let z = vb.leading(j).matmul(&p).matmul_t(&wb.leading(j));
        let lhs = a.spmm(&z).unwrap().add(&b.left_mul_dense(&z).unwrap());
        let rhs = vb.v().matmul(&core).matmul_t(wb.v());
        assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-12 * lhs.frobenius_norm());
    }

    #[test]
    fn identity_operators_converge_in_one_step() {
        let (n, m, s) = (6, 5, 2);
        let c1 = random_dense(n, s, 1);
        let c2 = random_dense(m, s, 2);
        let half = c1.matmul_t(&c2).scaled(0.5);
        let cfg = SolverConfig::default();
        for sol in [
            factorized_cg(
                &SparseMatrix::identity(n),
                &SparseMatrix::identity(m),
                &c1,
                &c2,
                &cfg,
            )
            .unwrap(),
            factorized_bicgstab(
                &SparseMatrix::identity(n),
                &SparseMatrix::identity(m),
                &c1,
                &c2,
                &cfg,
            )
            .unwrap(),
        ] {
            assert_eq!(sol.status, SolveStatus::Converged);
            assert_eq!(sol.iterations(), 1);
            assert!(sol.to_dense().sub(&half).max_abs() < 1e-14);
        }
        let c = random_dense(n, s, 3);
        let sol = factorized_cg_lyapunov(&SparseMatrix::identity(n), &c, &cfg).unwrap();
        assert_eq!(sol.iterations(), 1);
        assert!(sol.to_dense().sub(&c.matmul_t(&c).scaled(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn cg_rejects_nonsymmetric_operator() {
        let a = random_nonsymmetric(8, 0.5, 1);
        let b = SparseMatrix::identity(8);
        let c = random_dense(8, 1, 1);
        assert!(matches!(
            factorized_cg(&a, &b, &c, &c, &SolverConfig::default()),
            Err(SolveError::NotSymmetric { which: "A", .. })
        ));
        assert!(factorized_cg_lyapunov(&a, &c, &SolverConfig::default()).is_err());
    }

    #[test]
    fn mismatched_rhs_is_rejected() {
        let a = SparseMatrix::identity(4);
        let c1 = random_dense(4, 2, 1);
        let c2 = random_dense(4, 1, 2);
        assert!(factorized_bicgstab(&a, &a, &c1, &c2, &SolverConfig::default()).is_err());
        let dup = DenseMatrix::hstack(&[&c2, &c2]);
        assert!(matches!(
            factorized_bicgstab(&a, &a, &dup, &dup, &SolverConfig::default()),
            Err(SolveError::Krylov(_))
        ));
    }

    #[test]
    fn cg_small_spd_matches_dense_residual() {
        let a = random_spd(8, 0.4, 11);
        let b = random_spd(6, 0.4, 12);
        let c1 = random_dense(8, 2, 13);
        let c2 = random_dense(6, 2, 14);
        let sol = factorized_cg(&a, &b, &c1, &c2, &SolverConfig::with_tol(1e-10)).unwrap();
        assert!(sol.converged());
        let tr = true_residual(&a, &b, &c1, &c2, &sol).unwrap();
        let dense = dense_residual(&a, &b, &c1, &c2, &sol.to_dense());
        assert!(tr <= 1e-9, "true residual {tr}");
        assert!((tr - dense).abs() <= 1e-12 + 1e-6 * dense);
    }

    #[test]
    fn lyapunov_matches_general_cg_history() {
        let a = laplacian_2d(10);
        let c = random_dense(100, 2, 21);
        let cfg = SolverConfig::with_tol(1e-8);
        let lyap = factorized_cg_lyapunov(&a, &c, &cfg).unwrap();
        let gen = factorized_cg(&a, &a.transpose(), &c, &c, &cfg).unwrap();
        assert_eq!(lyap.iterations(), gen.iterations());
        for (x, y) in lyap
            .history
            .rel_residuals()
            .iter()
            .zip(gen.history.rel_residuals())
        {
            assert!((x - y).abs() <= 1e-10 * y.abs());
        }
        assert!(lyap.core.sub(&lyap.core.transpose()).max_abs() <= 1e-12 * lyap.core.max_abs());
    }

    #[test]
    fn rank_bookkeeping() {
        let a = laplacian_2d(8);
        let c = random_dense(64, 2, 3);
        for iters in 1..5 {
            let cfg = SolverConfig::with_tol(1e-14).max_iter(iters);
            let cg = factorized_cg(&a, &a, &c, &c, &cfg).unwrap();
            assert_eq!(cg.status, SolveStatus::MaxIter);
            assert_eq!(cg.rank(), iters * 2);
            let bi = factorized_bicgstab(&a, &a, &c, &c, &cfg).unwrap();
            assert_eq!(bi.rank(), 2 * iters * 2);
        }
    }

    #[test]
    fn true_residual_trivial_cases() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap();
        let b = SparseMatrix::from_triplets(1, 1, &[(0, 0, 3.0)]).unwrap();
        let c1 = DenseMatrix::from_rows(&[&[1.5]]);
        let c2 = DenseMatrix::from_rows(&[&[2.0]]);
        let sol = FactorizedSolution {
            v: DenseMatrix::identity(1),
            core: DenseMatrix::from_rows(&[&[3.0 / 5.0]]),
            w: DenseMatrix::identity(1),
            history: ConvergenceHistory::default(),
            status: SolveStatus::Converged,
            breakdown: None,
            bookkept_rank: 1,
        };
        assert!(true_residual(&a, &b, &c1, &c2, &sol).unwrap() <= 1e-15);
        let zero = FactorizedSolution {
            core: DenseMatrix::zeros(1, 1),
            ..sol
        };
        assert!((true_residual(&a, &b, &c1, &c2, &zero).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn true_residual_matches_dense() {
        let a = random_nonsymmetric(12, 0.3, 1);
        let b = random_nonsymmetric(9, 0.3, 2);
        let c1 = random_dense(12, 2, 3);
        let c2 = random_dense(9, 2, 4);
        let u = random_dense(12, 3, 5);
        let core = random_dense(3, 4, 6).scaled(0.01);
        let v = random_dense(9, 4, 7);
        let (res, rhs) = lowrank_residual(&a, &b, &c1, &c2, &u, &core, &v).unwrap();
        let x = u.matmul(&core).matmul_t(&v);
        let dense = dense_residual(&a, &b, &c1, &c2, &x);
        assert!((res / rhs - dense).abs() <= 1e-12 * dense);
    }
}

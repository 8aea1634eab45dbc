//! Truncated CG (Lyapunov, symmetric factors) and truncated BiCGSTAB
//! (Sylvester, general factors). Every iterate is stored in factored form and
//! recompressed with the truncation operator after the updates that would
//! otherwise grow its rank without bound.

use serde::{Deserialize, Serialize};

use super::lowrank::{symmetric_truncate, truncate, LowRankMatrix, SymmetricLowRankMatrix};
use crate::factorized::SYMMETRY_TOL;
use crate::history::{Category, ConvergenceHistory, SolveError, SolveStatus, SolverConfig, Timer};
use crate::linalg::{DenseMatrix, LinalgError, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCgOptions {
    pub truncate_q: bool,
    pub truncate_r: bool,
    pub max_rank: Option<usize>,
}

impl Default for TruncatedCgOptions {
    fn default() -> Self {
        Self {
            truncate_q: false,
            truncate_r: true,
            max_rank: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualVariant {
    /// `R = 𝒯(S − ω T)`.
    Recursion,
    /// `R = C₁C₂ᵀ − A X − X B`, optionally truncated.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedBicgstabOptions {
    pub truncate_q: bool,
    pub truncate_s: bool,
    pub truncate_t: bool,
    pub residual_variant: ResidualVariant,
    /// Only consulted for [`ResidualVariant::Explicit`]; the recursion always truncates.
    pub truncate_r: bool,
    pub max_rank: Option<usize>,
}

impl Default for TruncatedBicgstabOptions {
    fn default() -> Self {
        Self {
            truncate_q: true,
            truncate_s: true,
            truncate_t: false,
            residual_variant: ResidualVariant::Recursion,
            truncate_r: false,
            max_rank: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SymmetricLowRankSolution {
    pub x: SymmetricLowRankMatrix,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub breakdown: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LowRankSolution {
    pub x: LowRankMatrix,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub breakdown: Option<String>,
}

fn check_eps(eps_t: f64) -> Result<(), SolveError> {
    if eps_t >= 0.0 && eps_t.is_finite() {
        Ok(())
    } else {
        Err(SolveError::InvalidConfig(format!(
            "truncation threshold must be >= 0, got {eps_t}"
        )))
    }
}

/// Truncated CG for `A X + X Aᵀ = C₁ C₁ᵀ` with symmetric positive definite `A`.
pub fn truncated_cg(
    a: &SparseMatrix,
    c1: &DenseMatrix,
    cfg: &SolverConfig,
    eps_t: f64,
    opts: TruncatedCgOptions,
) -> Result<SymmetricLowRankSolution, SolveError> {
    cfg.validate()?;
    check_eps(eps_t)?;
    if !a.is_square() || c1.nrows() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            op: "A (n x n), C1 (n x s)",
            left: (a.nrows(), a.ncols()),
            right: c1.shape(),
        }
        .into());
    }
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(SolveError::NotSymmetric {
            which: "A",
            asymmetry: a.asymmetry(),
        });
    }
    let n = a.nrows();
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();
    let trunc = |m: &SymmetricLowRankMatrix, timer: &mut Timer| {
        timer.time(Category::Truncation, || {
            symmetric_truncate(m, eps_t, opts.max_rank)
        })
    };

    let rhs = SymmetricLowRankMatrix::from_factor(c1);
    let mut x = SymmetricLowRankMatrix::zeros(n);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let r0_norm = timer.time(Category::BasicOps, || r.norm());
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let status = |x, history, status, breakdown| SymmetricLowRankSolution {
        x,
        history,
        status,
        breakdown,
    };
    let limit = cfg.iteration_limit(n, n);
    for k in 0..limit {
        let mut q = timer.time(Category::BasicOps, || p.lyapunov(a))?;
        if opts.truncate_q {
            q = trunc(&q, &mut timer);
        }
        let (xi, rp) = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            Ok((p.inner(&q)?, r.inner(&p)?))
        })?;
        if !(xi.abs() > cfg.breakdown_tol * res_k * res_k) {
            let msg = format!("truncated CG xi = {xi:e} vanished at iteration {k}");
            return Ok(status(x, history, SolveStatus::Breakdown, Some(msg)));
        }
        let alpha = rp / xi;
        let x_sum = timer.time(Category::BasicOps, || x.combine(1.0, &p, alpha))?;
        x = trunc(&x_sum, &mut timer);
        let r_full = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            rhs.combine(1.0, &x.lyapunov(a)?, -1.0)
        })?;
        r = if opts.truncate_r {
            trunc(&r_full, &mut timer)
        } else {
            r_full
        };
        let res = timer.time(Category::BasicOps, || r.norm());
        history.push(k + 1, res / r0_norm, &mut timer);
        res_k = res;
        if res <= r0_norm * cfg.eps_tol {
            return Ok(status(x, history, SolveStatus::Converged, None));
        }
        let p_sum = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            let beta = -r.inner(&q)? / xi;
            r.combine(1.0, &p, beta)
        })?;
        p = trunc(&p_sum, &mut timer);
    }
    Ok(status(x, history, SolveStatus::MaxIter, None))
}

/// Truncated BiCGSTAB for `A X + X B = C₁ C₂ᵀ` with shadow residual `R̃₀ = R₀`
/// (never truncated).
pub fn truncated_bicgstab(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c1: &DenseMatrix,
    c2: &DenseMatrix,
    cfg: &SolverConfig,
    eps_t: f64,
    opts: TruncatedBicgstabOptions,
) -> Result<LowRankSolution, SolveError> {
    cfg.validate()?;
    check_eps(eps_t)?;
    if !a.is_square()
        || !b.is_square()
        || c1.nrows() != a.nrows()
        || c2.nrows() != b.nrows()
        || c1.ncols() != c2.ncols()
    {
        return Err(LinalgError::DimensionMismatch {
            op: "C1 (n x s), C2 (m x s)",
            left: c1.shape(),
            right: c2.shape(),
        }
        .into());
    }
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();
    let trunc = |m: &LowRankMatrix, timer: &mut Timer| {
        timer.time(Category::Truncation, || truncate(m, eps_t, opts.max_rank))
    };

    let rhs = LowRankMatrix::from_outer(c1, c2)?;
    let shadow = rhs.clone();
    let mut x = LowRankMatrix::zeros(a.nrows(), b.nrows());
    let mut r = rhs.clone();
    let mut p = r.clone();
    let (mut rho, r0_norm) = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
        Ok((r.inner(&shadow)?, r.norm()))
    })?;
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let done = |x, history, status, breakdown| LowRankSolution {
        x,
        history,
        status,
        breakdown,
    };
    let limit = cfg.iteration_limit(a.nrows(), b.nrows());
    for k in 0..limit {
        let mut q = timer.time(Category::BasicOps, || p.sylvester(a, b))?;
        if opts.truncate_q {
            q = trunc(&q, &mut timer);
        }
        let pivot = timer.time(Category::BasicOps, || shadow.inner(&q))?;
        if !(pivot.abs() > cfg.breakdown_tol * r0_norm * res_k) {
            let msg = format!("BiCGSTAB pivot <R~0, Q_k> = {pivot:e} vanished at iteration {k}");
            return Ok(done(x, history, SolveStatus::Breakdown, Some(msg)));
        }
        let alpha = rho / pivot;
        let mut s = timer.time(Category::BasicOps, || r.combine(1.0, &q, -alpha))?;
        if opts.truncate_s {
            s = trunc(&s, &mut timer);
        }
        let s_norm = timer.time(Category::BasicOps, || s.norm());
        if s_norm <= r0_norm * cfg.eps_tol {
            let x_sum = timer.time(Category::BasicOps, || x.combine(1.0, &p, alpha))?;
            x = trunc(&x_sum, &mut timer);
            history.push(k + 1, s_norm / r0_norm, &mut timer);
            return Ok(done(x, history, SolveStatus::Converged, None));
        }
        let mut t = timer.time(Category::BasicOps, || s.sylvester(a, b))?;
        if opts.truncate_t {
            t = trunc(&t, &mut timer);
        }
        let (ts, tt) = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            Ok((t.inner(&s)?, t.inner(&t)?))
        })?;
        if !(tt.sqrt() > cfg.breakdown_tol * s_norm) {
            let msg = format!("BiCGSTAB <T_k, T_k> = {tt:e} vanished at iteration {k}");
            return Ok(done(x, history, SolveStatus::Breakdown, Some(msg)));
        }
        let omega = ts / tt;
        if omega == 0.0 || !omega.is_finite() {
            let msg = format!("BiCGSTAB omega = {omega:e} at iteration {k}");
            return Ok(done(x, history, SolveStatus::Breakdown, Some(msg)));
        }
        let x_sum = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            x.combine(1.0, &p, alpha)?.combine(1.0, &s, omega)
        })?;
        x = trunc(&x_sum, &mut timer);
        r = match opts.residual_variant {
            ResidualVariant::Recursion => {
                let r_full = timer.time(Category::BasicOps, || s.combine(1.0, &t, -omega))?;
                trunc(&r_full, &mut timer)
            }
            ResidualVariant::Explicit => {
                let r_full = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
                    rhs.combine(1.0, &x.sylvester(a, b)?, -1.0)
                })?;
                if opts.truncate_r {
                    trunc(&r_full, &mut timer)
                } else {
                    r_full
                }
            }
        };
        let res = timer.time(Category::BasicOps, || r.norm());
        history.push(k + 1, res / r0_norm, &mut timer);
        res_k = res;
        if res <= r0_norm * cfg.eps_tol {
            return Ok(done(x, history, SolveStatus::Converged, None));
        }
        let rho_next = timer.time(Category::BasicOps, || shadow.inner(&r))?;
        if !(rho_next.abs() > cfg.breakdown_tol * r0_norm * res) {
            let msg = format!(
                "BiCGSTAB rho = {rho_next:e} vanished at iteration {}",
                k + 1
            );
            return Ok(done(x, history, SolveStatus::Breakdown, Some(msg)));
        }
        let p_sum = timer.time(Category::BasicOps, || -> Result<_, LinalgError> {
            let beta = (alpha / omega) * (rho_next / rho);
            let dir = p.combine(1.0, &q, -omega)?;
            r.combine(1.0, &dir, beta)
        })?;
        p = trunc(&p_sum, &mut timer);
        rho = rho_next;
    }
    Ok(done(x, history, SolveStatus::MaxIter, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{laplacian_2d, random_dense, random_nonsymmetric, random_spd};
    use crate::reference::{matrix_oriented_bicgstab, matrix_oriented_cg};

    #[test]
    fn identity_one_iteration() {
        let c = random_dense(6, 2, 1);
        let id = SparseMatrix::identity(6);
        let sol = truncated_cg(
            &id,
            &c,
            &SolverConfig::default(),
            1e-12,
            TruncatedCgOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.history.iterations(), 1);
        assert!(sol.x.to_dense().sub(&c.matmul_t(&c).scaled(0.5)).max_abs() < 1e-14);

        let c2 = random_dense(5, 2, 2);
        let sol = truncated_bicgstab(
            &id,
            &SparseMatrix::identity(5),
            &c,
            &c2,
            &SolverConfig::default(),
            1e-12,
            TruncatedBicgstabOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.history.iterations(), 1);
        assert!(sol.x.to_dense().sub(&c.matmul_t(&c2).scaled(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn truncated_cg_tracks_dense_cg() {
        let a = random_spd(20, 0.3, 3);
        let c = random_dense(20, 2, 4);
        let cfg = SolverConfig::with_tol(1e-12).max_iter(15);
        let t = truncated_cg(&a, &c, &cfg, 1e-14, TruncatedCgOptions::default()).unwrap();
        let d = matrix_oriented_cg(&a, &a, &c.matmul_t(&c), &cfg).unwrap();
        let (tr, dr) = (t.history.rel_residuals(), d.history.rel_residuals());
        for i in 0..tr.len().min(dr.len()).min(16) {
            assert!(
                (tr[i] - dr[i]).abs() <= 1e-6 * dr[i],
                "iteration {i}: {} vs {}",
                tr[i],
                dr[i]
            );
        }
    }

    #[test]
    fn truncated_bicgstab_tracks_dense_bicgstab() {
        let a = random_nonsymmetric(15, 0.3, 5);
        let b = random_nonsymmetric(12, 0.3, 6);
        let c1 = random_dense(15, 2, 7);
        let c2 = random_dense(12, 2, 8);
        let cfg = SolverConfig::with_tol(1e-13).max_iter(10);
        let d = matrix_oriented_bicgstab(&a, &b, &c1.matmul_t(&c2), &cfg).unwrap();
        for variant in [ResidualVariant::Recursion, ResidualVariant::Explicit] {
            let opts = TruncatedBicgstabOptions {
                residual_variant: variant,
                ..Default::default()
            };
            let t = truncated_bicgstab(&a, &b, &c1, &c2, &cfg, 1e-14, opts).unwrap();
            let (tr, dr) = (t.history.rel_residuals(), d.history.rel_residuals());
            for i in 0..tr.len().min(dr.len()) {
                // The explicit residual differs from the recursive one at rounding level.
                if variant == ResidualVariant::Explicit && dr[i] < 1e-8 {
                    break;
                }
                assert!(
                    (tr[i] - dr[i]).abs() <= 1e-5 * dr[i],
                    "{variant:?} iteration {i}: {} vs {}",
                    tr[i],
                    dr[i]
                );
            }
        }
    }

    #[test]
    fn lyapunov_timing_categories() {
        let a = laplacian_2d(6);
        let c = random_dense(36, 1, 9);
        let sol = truncated_cg(
            &a,
            &c,
            &SolverConfig::with_tol(1e-6),
            1e-10,
            TruncatedCgOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_eq!(sol.history.krylov_process_s(), 0.0);
        assert!(sol.history.truncation_s() > 0.0);
    }

    #[test]
    fn rejects_bad_threshold_and_nonsymmetric() {
        let a = random_nonsymmetric(6, 0.5, 1);
        let c = random_dense(6, 1, 2);
        let cfg = SolverConfig::default();
        assert!(truncated_cg(&a, &c, &cfg, 1e-8, TruncatedCgOptions::default()).is_err());
        let spd = SparseMatrix::identity(6);
        assert!(truncated_cg(&spd, &c, &cfg, -1.0, TruncatedCgOptions::default()).is_err());
    }
}

//! Dense matrix-oriented CG and BiCGSTAB: the textbook recurrences with
//! `n × m` iterates and the operator `X ↦ A X + X B`.

use crate::history::{Category, ConvergenceHistory, SolveError, SolveStatus, SolverConfig, Timer};
use crate::linalg::{frobenius_inner, DenseMatrix, LinalgError, SparseMatrix};

/// Largest dense iterate (entries) the matrix-oriented methods will allocate.
pub const DENSE_ENTRY_LIMIT: f64 = 4e8;

#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub x: DenseMatrix,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub breakdown: Option<String>,
}

impl DenseSolution {
    pub fn iterations(&self) -> usize {
        self.history.iterations()
    }
}

pub(crate) fn sylvester_dense(
    a: &SparseMatrix,
    b: &SparseMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix, LinalgError> {
    let mut out = a.spmm(x)?;
    out.axpy(1.0, &b.left_mul_dense(x)?);
    Ok(out)
}

fn check(a: &SparseMatrix, b: &SparseMatrix, c: &DenseMatrix) -> Result<(), SolveError> {
    if !a.is_square() || !b.is_square() || c.shape() != (a.nrows(), b.nrows()) {
        return Err(LinalgError::DimensionMismatch {
            op: "A X + X B = C with C (n x m)",
            left: (a.nrows(), b.nrows()),
            right: c.shape(),
        }
        .into());
    }
    let entries = c.nrows() as f64 * c.ncols() as f64;
    if entries > DENSE_ENTRY_LIMIT {
        return Err(SolveError::TooLarge {
            entries,
            limit: DENSE_ENTRY_LIMIT,
        });
    }
    Ok(())
}

pub fn matrix_oriented_cg(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<DenseSolution, SolveError> {
    cfg.validate()?;
    check(a, b, c)?;
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();
    let mut x = DenseMatrix::zeros(c.nrows(), c.ncols());
    let mut r = c.clone();
    let mut p = r.clone();
    let mut rho = frobenius_inner(&r, &r)?;
    let r0_norm = rho.sqrt();
    history.push(0, 1.0, &mut timer);

    let limit = cfg.iteration_limit(a.nrows(), b.nrows());
    for k in 0..limit {
        let q = timer.time(Category::BasicOps, || sylvester_dense(a, b, &p))?;
        let denom = frobenius_inner(&r, &q)?;
        if !(denom.abs() > cfg.breakdown_tol * rho) {
            let msg = format!("CG pivot <R_k, Q_k> = {denom:e} vanished at iteration {k}");
            return Ok(DenseSolution {
                x,
                history,
                status: SolveStatus::Breakdown,
                breakdown: Some(msg),
            });
        }
        let res = timer.time(Category::BasicOps, || {
            let alpha = rho / denom;
            x.axpy(alpha, &p);
            r.axpy(-alpha, &q);
            r.frobenius_norm()
        });
        history.push(k + 1, res / r0_norm, &mut timer);
        if res <= r0_norm * cfg.eps_tol {
            return Ok(DenseSolution {
                x,
                history,
                status: SolveStatus::Converged,
                breakdown: None,
            });
        }
        timer.time(Category::BasicOps, || {
            let rho_next = res * res;
            let beta = rho_next / rho;
            p.scale(beta);
            p.axpy(1.0, &r);
            rho = rho_next;
        });
    }
    Ok(DenseSolution {
        x,
        history,
        status: SolveStatus::MaxIter,
        breakdown: None,
    })
}

/// Shadow residual `R̃₀ = R₀ = C`.
pub fn matrix_oriented_bicgstab(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &DenseMatrix,
    cfg: &SolverConfig,
) -> Result<DenseSolution, SolveError> {
    cfg.validate()?;
    check(a, b, c)?;
    let mut timer = Timer::default();
    let mut history = ConvergenceHistory::default();
    let mut x = DenseMatrix::zeros(c.nrows(), c.ncols());
    let shadow = c.clone();
    let mut r = c.clone();
    let mut p = r.clone();
    let mut rho = frobenius_inner(&r, &shadow)?;
    let r0_norm = r.frobenius_norm();
    let mut res_k = r0_norm;
    history.push(0, 1.0, &mut timer);

    let breakdown = |x, history, msg: String| {
        Ok(DenseSolution {
            x,
            history,
            status: SolveStatus::Breakdown,
            breakdown: Some(msg),
        })
    };
    let limit = cfg.iteration_limit(a.nrows(), b.nrows());
    for k in 0..limit {
        let q = timer.time(Category::BasicOps, || sylvester_dense(a, b, &p))?;
        let pivot = frobenius_inner(&shadow, &q)?;
        if !(pivot.abs() > cfg.breakdown_tol * r0_norm * res_k) {
            return breakdown(
                x,
                history,
                format!("BiCGSTAB pivot <R~0, Q_k> = {pivot:e} vanished at iteration {k}"),
            );
        }
        let alpha = rho / pivot;
        let mut s = r.clone();
        s.axpy(-alpha, &q);
        let s_norm = s.frobenius_norm();
        if s_norm <= r0_norm * cfg.eps_tol {
            x.axpy(alpha, &p);
            history.push(k + 1, s_norm / r0_norm, &mut timer);
            return Ok(DenseSolution {
                x,
                history,
                status: SolveStatus::Converged,
                breakdown: None,
            });
        }
        let t = timer.time(Category::BasicOps, || sylvester_dense(a, b, &s))?;
        let tt = frobenius_inner(&t, &t)?;
        if !(tt.sqrt() > cfg.breakdown_tol * s_norm) {
            return breakdown(
                x,
                history,
                format!("BiCGSTAB <T_k, T_k> = {tt:e} vanished at iteration {k}"),
            );
        }
        let omega = frobenius_inner(&t, &s)? / tt;
        if omega == 0.0 || !omega.is_finite() {
            return breakdown(
                x,
                history,
                format!("BiCGSTAB omega = {omega:e} at iteration {k}"),
            );
        }
        let res = timer.time(Category::BasicOps, || {
            x.axpy(alpha, &p);
            x.axpy(omega, &s);
            r = s;
            r.axpy(-omega, &t);
            r.frobenius_norm()
        });
        history.push(k + 1, res / r0_norm, &mut timer);
        if res <= r0_norm * cfg.eps_tol {
            return Ok(DenseSolution {
                x,
                history,
                status: SolveStatus::Converged,
                breakdown: None,
            });
        }
        res_k = res;
        let rho_next = frobenius_inner(&r, &shadow)?;
        if !(rho_next.abs() > cfg.breakdown_tol * r0_norm * res) {
            return breakdown(
                x,
                history,
                format!(
                    "BiCGSTAB rho = {rho_next:e} vanished at iteration {}",
                    k + 1
                ),
            );
        }
        timer.time(Category::BasicOps, || {
            let beta = (alpha / omega) * (rho_next / rho);
            p.axpy(-omega, &q);
            p.scale(beta);
            p.axpy(1.0, &r);
            rho = rho_next;
        });
    }
    Ok(DenseSolution {
        x,
        history,
        status: SolveStatus::MaxIter,
        breakdown: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{random_dense, random_nonsymmetric, random_spd};
    use crate::reference::kron_solve;

    #[test]
    fn identity_pair_one_iteration() {
        let c = random_dense(5, 4, 1);
        let id5 = SparseMatrix::identity(5);
        let id4 = SparseMatrix::identity(4);
        for sol in [
            matrix_oriented_cg(&id5, &id4, &c, &SolverConfig::default()).unwrap(),
            matrix_oriented_bicgstab(&id5, &id4, &c, &SolverConfig::default()).unwrap(),
        ] {
            assert_eq!(sol.status, SolveStatus::Converged);
            assert_eq!(sol.iterations(), 1);
            assert!(sol.x.sub(&c.scaled(0.5)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn cg_matches_kron_oracle() {
        let a = random_spd(12, 0.3, 1);
        let b = random_spd(10, 0.3, 2);
        let c1 = random_dense(12, 2, 3);
        let c2 = random_dense(10, 2, 4);
        let sol =
            matrix_oriented_cg(&a, &b, &c1.matmul_t(&c2), &SolverConfig::with_tol(1e-12)).unwrap();
        let x = kron_solve(&a, &b, &c1, &c2).unwrap();
        assert!(sol.x.sub(&x).frobenius_norm() <= 1e-8 * x.frobenius_norm());
    }

    #[test]
    fn bicgstab_matches_kron_oracle() {
        let a = random_nonsymmetric(11, 0.3, 5);
        let b = random_nonsymmetric(9, 0.3, 6);
        let c1 = random_dense(11, 2, 7);
        let c2 = random_dense(9, 2, 8);
        let sol =
            matrix_oriented_bicgstab(&a, &b, &c1.matmul_t(&c2), &SolverConfig::with_tol(1e-12))
                .unwrap();
        let x = kron_solve(&a, &b, &c1, &c2).unwrap();
        assert!(sol.x.sub(&x).frobenius_norm() <= 1e-7 * x.frobenius_norm());
    }

    #[test]
    fn shape_errors() {
        let a = SparseMatrix::identity(3);
        let c = DenseMatrix::zeros(3, 4);
        assert!(matrix_oriented_cg(&a, &a, &c, &SolverConfig::default()).is_err());
    }
}

use proptest::prelude::*;
use sylkrylov::factorized::{
    factorized_bicgstab, factorized_cg, factorized_cg_lyapunov, true_residual,
};
use sylkrylov::linalg::{singular_values, DenseMatrix, SparseMatrix};
use sylkrylov::problems::{laplacian_2d, random_dense, random_nonsymmetric, random_spd};
use sylkrylov::reference::{kron_solve, matrix_oriented_bicgstab, matrix_oriented_cg};
use sylkrylov::{FactorizedSolution, SolveStatus, SolverConfig};

fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

fn numerical_rank(x: &DenseMatrix) -> usize {
    let sv = singular_values(x);
    let lead = sv.first().copied().unwrap_or(0.0);
    let tol = lead * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// `X − V VᵀX W Wᵀ` relative to `X`, and the numerical-rank bound.
fn check_structure(sol: &FactorizedSolution) -> Result<(), TestCaseError> {
    let x = sol.to_dense();
    let proj = sol
        .v
        .matmul(&sol.v.t_matmul(&x))
        .matmul(&sol.w)
        .matmul_t(&sol.w);
    prop_assert!(x.sub(&proj).frobenius_norm() <= 1e-10 * x.frobenius_norm());
    prop_assert!(numerical_rank(&x) <= sol.bookkept_rank);
    prop_assert!(sol.rank() <= sol.bookkept_rank);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn cg_matches_kron_oracle(n in 4usize..=30, m in 4usize..=30, s in 1usize..=3, seed in any::<u64>()) {
        let a = random_spd(n, 0.3, seed);
        let b = random_spd(m, 0.3, seed ^ 1);
        let c1 = random_dense(n, s, seed ^ 2);
        let c2 = random_dense(m, s, seed ^ 3);
        let cfg = SolverConfig::with_tol(1e-10);
        let sol = factorized_cg(&a, &b, &c1, &c2, &cfg).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Converged);
        let x = kron_solve(&a, &b, &c1, &c2).unwrap();
        prop_assert!(rel(&sol.to_dense(), &x) <= 1e-7);
        prop_assert!(true_residual(&a, &b, &c1, &c2, &sol).unwrap() <= 10.0 * cfg.eps_tol);
        prop_assert!(sol.bookkept_rank <= (sol.iterations() + 1) * s);
    }

    #[test]
    fn lyapunov_cg_matches_kron_oracle(n in 4usize..=30, s in 1usize..=3, seed in any::<u64>()) {
        let a = random_spd(n, 0.3, seed);
        let c1 = random_dense(n, s, seed ^ 2);
        let cfg = SolverConfig::with_tol(1e-10);
        let sol = factorized_cg_lyapunov(&a, &c1, &cfg).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Converged);
        let x = kron_solve(&a, &a, &c1, &c1).unwrap();
        let xf = sol.to_dense();
        prop_assert!(rel(&xf, &x) <= 1e-7);
        prop_assert!(xf.sub(&xf.transpose()).frobenius_norm() <= 1e-12 * xf.frobenius_norm());
    }

    #[test]
    fn bicgstab_matches_kron_oracle(n in 4usize..=30, m in 4usize..=30, s in 1usize..=3, seed in any::<u64>()) {
        let a = random_nonsymmetric(n, 0.3, seed);
        let b = random_nonsymmetric(m, 0.3, seed ^ 1);
        let c1 = random_dense(n, s, seed ^ 2);
        let c2 = random_dense(m, s, seed ^ 3);
        let cfg = SolverConfig::with_tol(1e-10);
        let sol = factorized_bicgstab(&a, &b, &c1, &c2, &cfg).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Converged);
        let x = kron_solve(&a, &b, &c1, &c2).unwrap();
        prop_assert!(rel(&sol.to_dense(), &x) <= 1e-7);
        prop_assert!(sol.bookkept_rank <= (2 * sol.iterations() + 2) * s);
    }

    /// Every iterate lies in range(V) ⊗ range(W) with rank at most the bookkept rank.
    #[test]
    fn iterates_live_in_the_krylov_tensor_space(s in 1usize..=2, iters in 1usize..=6, seed in any::<u64>()) {
        let n = 25;
        let cfg = SolverConfig::with_tol(1e-14).max_iter(iters);
        let spd = random_spd(n, 0.2, seed);
        let spd_b = random_spd(n, 0.2, seed ^ 1);
        let ns = random_nonsymmetric(n, 0.2, seed ^ 2);
        let ns_b = random_nonsymmetric(n, 0.2, seed ^ 3);
        let c1 = random_dense(n, s, seed ^ 4);
        let c2 = random_dense(n, s, seed ^ 5);
        check_structure(&factorized_cg(&spd, &spd_b, &c1, &c2, &cfg).unwrap())?;
        check_structure(&factorized_cg_lyapunov(&spd, &c1, &cfg).unwrap())?;
        check_structure(&factorized_bicgstab(&ns, &ns_b, &c1, &c2, &cfg).unwrap())?;
    }

    /// The factorized and matrix-oriented recurrences produce the same residual history.
    #[test]
    fn histories_match_matrix_oriented(n in 8usize..=30, s in 1usize..=3, seed in any::<u64>()) {
        let cfg = SolverConfig::with_tol(1e-8);
        let a = random_spd(n, 0.3, seed);
        let b = random_spd(n, 0.3, seed ^ 1);
        let c1 = random_dense(n, s, seed ^ 2);
        let c2 = random_dense(n, s, seed ^ 3);
        let f = factorized_cg(&a, &b, &c1, &c2, &cfg).unwrap();
        let d = matrix_oriented_cg(&a, &b, &c1.matmul_t(&c2), &cfg).unwrap();
        let (hf, hd) = (f.history.rel_residuals(), d.history.rel_residuals());
        for (x, y) in hf.iter().zip(&hd).take(8) {
            prop_assert!((x - y).abs() <= 1e-6 * y.max(1e-12));
        }
        let a = random_nonsymmetric(n, 0.3, seed);
        let b = random_nonsymmetric(n, 0.3, seed ^ 1);
        let f = factorized_bicgstab(&a, &b, &c1, &c2, &cfg).unwrap();
        let d = matrix_oriented_bicgstab(&a, &b, &c1.matmul_t(&c2), &cfg).unwrap();
        let (hf, hd) = (f.history.rel_residuals(), d.history.rel_residuals());
        for (x, y) in hf.iter().zip(&hd).take(5) {
            prop_assert!((x - y).abs() <= 1e-4 * y.max(1e-12));
        }
    }
}

#[test]
fn laplacian_lyapunov_converges_with_bounded_true_residual() {
    let a = laplacian_2d(12);
    let c1 = random_dense(144, 2, 3);
    let cfg = SolverConfig::with_tol(1e-8);
    let sol = factorized_cg_lyapunov(&a, &c1, &cfg).unwrap();
    assert!(sol.converged());
    assert!(true_residual(&a, &a, &c1, &c1, &sol).unwrap() <= 10.0 * cfg.eps_tol);
    let general = factorized_cg(&a, &a, &c1, &c1, &cfg).unwrap();
    assert_eq!(general.iterations(), sol.iterations());
}

#[test]
fn nonsymmetric_operator_rejected_by_cg() {
    let a = random_nonsymmetric(10, 0.3, 1);
    let c = random_dense(10, 1, 2);
    assert!(factorized_cg(&a, &a, &c, &c, &SolverConfig::default()).is_err());
    assert!(factorized_cg_lyapunov(&a, &c, &SolverConfig::default()).is_err());
}

#[test]
fn identity_pair_converges_in_one_step() {
    let id = SparseMatrix::identity(7);
    let c1 = random_dense(7, 2, 9);
    let c2 = random_dense(7, 2, 10);
    for sol in [
        factorized_cg(&id, &id, &c1, &c2, &SolverConfig::default()).unwrap(),
        factorized_bicgstab(&id, &id, &c1, &c2, &SolverConfig::default()).unwrap(),
    ] {
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_eq!(sol.iterations(), 1);
        assert!(rel(&sol.to_dense(), &c1.matmul_t(&c2).scaled(0.5)) < 1e-14);
    }
}

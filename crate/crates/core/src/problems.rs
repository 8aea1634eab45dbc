//! Deterministic test-problem generators.
//!
//! Random data comes from ChaCha8 (`rand_chacha` 0.9) seeded with a `u64`;
//! normal variates use `rand_distr::StandardNormal` (ziggurat). Both are
//! platform independent, so a seed pins a matrix bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{DenseMatrix, SparseMatrix};

/// Default convection vector for the nonsymmetric 3D operator.
pub const DEFAULT_CONVECTION: [f64; 3] = [10.0, 10.0, 10.0];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows × s` matrix with i.i.d. standard normal entries.
pub fn random_rhs(rows: usize, s: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    let data = (0..rows * s)
        .map(|_| r.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix::from_col_major(rows, s, data).expect("length matches")
}

/// Alias of [`random_rhs`] for generic dense test data.
pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    random_rhs(rows, cols, seed)
}

/// Constant-coefficient tridiagonal matrix `tridiag(lower, diag, upper)`.
pub fn tridiagonal(n: usize, lower: f64, diag: f64, upper: f64) -> SparseMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            t.push((i, i - 1, lower));
        }
        t.push((i, i, diag));
        if i + 1 < n {
            t.push((i, i + 1, upper));
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid tridiagonal")
}

/// Five-point finite-difference Laplacian `I⊗T + T⊗I` on a `grid × grid` mesh,
/// with `T = tridiag(-1, 2, -1)` and no `h²` scaling.
pub fn laplacian_2d(grid: usize) -> SparseMatrix {
    assert!(grid >= 2, "grid must be at least 2");
    let n = grid * grid;
    let idx = |i: usize, j: usize| i + grid * j;
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..grid {
        for i in 0..grid {
            let p = idx(i, j);
            if j > 0 {
                t.push((p, idx(i, j - 1), -1.0));
            }
            if i > 0 {
                t.push((p, idx(i - 1, j), -1.0));
            }
            t.push((p, p, 4.0));
            if i + 1 < grid {
                t.push((p, idx(i + 1, j), -1.0));
            }
            if j + 1 < grid {
                t.push((p, idx(i, j + 1), -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid stencil")
}

/// Seven-point `-Δ` plus centered convection `c·∇` on a `grid³` mesh.
///
/// Unscaled diffusion (diagonal 6, neighbours −1); the convection term is
/// multiplied by `h²` like the diffusion, giving `±c_d·h/2` on the `d`-axis
/// neighbours with `h = 1/(grid+1)`. Index order is x fastest, then y, then z.
pub fn convection_diffusion_3d(grid: usize, convection: [f64; 3]) -> SparseMatrix {
    assert!(grid >= 2, "grid must be at least 2");
    let n = grid * grid * grid;
    let h = 1.0 / (grid as f64 + 1.0);
    let idx = |p: [usize; 3]| p[0] + grid * (p[1] + grid * p[2]);
    let mut t = Vec::with_capacity(7 * n);
    for z in 0..grid {
        for y in 0..grid {
            for x in 0..grid {
                let here = [x, y, z];
                let row = idx(here);
                t.push((row, row, 6.0));
                for d in 0..3 {
                    let shift = convection[d] * h / 2.0;
                    if here[d] > 0 {
                        let mut q = here;
                        q[d] -= 1;
                        t.push((row, idx(q), -1.0 - shift));
                    }
                    if here[d] + 1 < grid {
                        let mut q = here;
                        q[d] += 1;
                        t.push((row, idx(q), -1.0 + shift));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid stencil")
}

/// Random sparse symmetric positive definite matrix: a symmetric pattern with
/// entries in (−1, 1) and a diagonal shift that makes it strictly diagonally dominant.
pub fn random_spd(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let mut dense = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            if r.random::<f64>() < density {
                let v = r.random_range(-1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dense[(i, j)].abs())
            .sum();
        dense[(i, i)] = off + 0.5 + r.random::<f64>();
    }
    SparseMatrix::from_dense(&dense, 0.0)
}

/// Random sparse nonsymmetric matrix, strictly diagonally dominant by rows and
/// columns with a positive diagonal (so its spectrum lies in the right half-plane).
pub fn random_nonsymmetric(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let mut dense = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i != j && r.random::<f64>() < density {
                dense[(i, j)] = r.random_range(-1.0..1.0);
            }
        }
    }
    for i in 0..n {
        let row: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dense[(i, j)].abs())
            .sum();
        let col: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dense[(j, i)].abs())
            .sum();
        dense[(i, i)] = row.max(col) + 0.5 + r.random::<f64>();
    }
    SparseMatrix::from_dense(&dense, 0.0)
}

/// A Sylvester (or Lyapunov) problem `A X + X B = C₁ C₂ᵀ`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub a: SparseMatrix,
    /// `None` for Lyapunov instances (`B = Aᵀ`, `C₂ = C₁`).
    pub b: Option<SparseMatrix>,
    pub c1: DenseMatrix,
    pub c2: DenseMatrix,
    pub label: String,
    pub seed: u64,
}

impl ProblemInstance {
    /// Lyapunov instance `A X + X Aᵀ = C₁ C₁ᵀ`.
    pub fn lyapunov(a: SparseMatrix, c1: DenseMatrix, label: impl Into<String>, seed: u64) -> Self {
        Self {
            a,
            b: None,
            c2: c1.clone(),
            c1,
            label: label.into(),
            seed,
        }
    }

    pub fn sylvester(
        a: SparseMatrix,
        b: SparseMatrix,
        c1: DenseMatrix,
        c2: DenseMatrix,
        label: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            a,
            b: Some(b),
            c1,
            c2,
            label: label.into(),
            seed,
        }
    }

    pub fn is_lyapunov(&self) -> bool {
        self.b.is_none()
    }

    /// The right operator `B`, materializing `Aᵀ` for Lyapunov instances.
    pub fn b_matrix(&self) -> SparseMatrix {
        self.b.clone().unwrap_or_else(|| self.a.transpose())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.as_ref().map_or(self.a.nrows(), |b| b.nrows())
    }

    pub fn rank(&self) -> usize {
        self.c1.ncols()
    }
}

/// 2D Laplacian Lyapunov problem with a seeded `grid² × s` right-hand factor.
pub fn laplacian_lyapunov(grid: usize, s: usize, seed: u64) -> ProblemInstance {
    let a = laplacian_2d(grid);
    let c1 = random_rhs(a.nrows(), s, seed);
    ProblemInstance::lyapunov(a, c1, format!("laplacian2d-{grid}"), seed)
}

/// 3D convection–diffusion Sylvester problem with `B = A`; `C₂` uses `seed + 1`.
pub fn convection_diffusion_sylvester(
    grid: usize,
    convection: [f64; 3],
    s: usize,
    seed: u64,
) -> ProblemInstance {
    let a = convection_diffusion_3d(grid, convection);
    let n = a.nrows();
    let c1 = random_rhs(n, s, seed);
    let c2 = random_rhs(n, s, seed.wrapping_add(1));
    ProblemInstance::sylvester(a.clone(), a, c1, c2, format!("convdiff3d-{grid}"), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;

    #[test]
    fn laplacian_grid_two() {
        let expect = DenseMatrix::from_rows(&[
            &[4.0, -1.0, -1.0, 0.0],
            &[-1.0, 4.0, 0.0, -1.0],
            &[-1.0, 0.0, 4.0, -1.0],
            &[0.0, -1.0, -1.0, 4.0],
        ]);
        assert_eq!(laplacian_2d(2).to_dense(), expect);
    }

    #[test]
    fn laplacian_interior_row_sums_vanish() {
        let a = laplacian_2d(3).to_dense();
        let centre: f64 = (0..9).map(|j| a[(4, j)]).sum();
        assert_eq!(centre, 0.0);
    }

    #[test]
    fn laplacian_smallest_eigenvalue() {
        let e = symmetric_eigen(&laplacian_2d(10).to_dense());
        let min = e.values.iter().copied().fold(f64::INFINITY, f64::min);
        let expect = 8.0 * (std::f64::consts::PI / 22.0).sin().powi(2);
        assert!((min - expect).abs() <= 1e-10 * expect);
    }

    #[test]
    fn laplacian_symmetric_positive_definite() {
        for grid in [2, 5, 12, 20] {
            let a = laplacian_2d(grid);
            assert_eq!(a.asymmetry(), 0.0);
            let e = symmetric_eigen(&a.to_dense());
            assert!(e.values.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn convection_diffusion_without_convection() {
        let a = convection_diffusion_3d(2, [0.0; 3]);
        assert_eq!(a.asymmetry(), 0.0);
        let d = a.to_dense();
        for i in 0..8 {
            assert_eq!(d[(i, i)], 6.0);
            for j in 0..8 {
                if i != j {
                    let neighbours = (i ^ j).count_ones() == 1;
                    assert_eq!(d[(i, j)], if neighbours { -1.0 } else { 0.0 });
                }
            }
        }
        assert!(convection_diffusion_3d(4, DEFAULT_CONVECTION).asymmetry() > 0.0);
    }

    #[test]
    fn convection_diffusion_matches_loop_built_stencil() {
        let grid = 5;
        let c = [10.0, 10.0, 10.0];
        let h = 1.0 / 6.0;
        let n = grid * grid * grid;
        let mut dense = DenseMatrix::zeros(n, n);
        for p in 0..n {
            let (x, y, z) = (p % grid, (p / grid) % grid, p / (grid * grid));
            dense[(p, p)] = 6.0;
            let coords = [x, y, z];
            let strides = [1, grid, grid * grid];
            for d in 0..3 {
                if coords[d] > 0 {
                    dense[(p, p - strides[d])] = -1.0 - c[d] * h / 2.0;
                }
                if coords[d] < grid - 1 {
                    dense[(p, p + strides[d])] = -1.0 + c[d] * h / 2.0;
                }
            }
        }
        assert_eq!(convection_diffusion_3d(grid, c).to_dense(), dense);
    }

    #[test]
    fn rhs_determinism_and_scale() {
        assert_eq!(random_rhs(40, 3, 7), random_rhs(40, 3, 7));
        assert_ne!(random_rhs(40, 3, 7), random_rhs(40, 3, 8));
        let c = random_rhs(10_000, 5, 123);
        for j in 0..5 {
            let norm = c.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 100.0).abs() <= 5.0, "column norm {norm}");
        }
    }

    #[test]
    fn random_generators_are_deterministic() {
        assert_eq!(random_spd(20, 0.2, 1), random_spd(20, 0.2, 1));
        assert!(random_spd(20, 0.2, 1).is_symmetric(0.0));
        assert_eq!(
            random_nonsymmetric(20, 0.2, 1),
            random_nonsymmetric(20, 0.2, 1)
        );
        assert_eq!(laplacian_2d(7), laplacian_2d(7));
    }
}

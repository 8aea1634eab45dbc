//! Blocked Householder QR (compact WY form, trailing updates through gemm).

use super::dense::gemm_into;
use super::DenseMatrix;

const PANEL: usize = 32;

/// Householder QR of an `n × c` matrix, `p = min(n, c)` reflectors.
///
/// `Q` is never formed unless asked for; [`HouseholderQr::apply_q`] multiplies
/// the thin `Q` (with the nonnegative-diagonal sign convention folded in) onto
/// a `p × k` matrix.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    /// Reflector vectors below the diagonal (unit leading entry implied).
    packed: DenseMatrix,
    tau: Vec<f64>,
    r: DenseMatrix,
    /// `±1` per row of `R` so that `diag(R) ≥ 0`.
    signs: Vec<f64>,
}

/// Reflector `H = I − τ v vᵀ` (`v₀ = 1`) mapping `x` to `β e₁`; returns `(τ, β)`
/// and overwrites `x[1..]` with `v[1..]`.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail = x[1..].iter().map(|v| v * v).sum::<f64>();
    if tail == 0.0 {
        return (0.0, alpha);
    }
    let norm = (alpha * alpha + tail).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    (tau, beta)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl HouseholderQr {
    pub fn new(x: &DenseMatrix) -> Self {
        let (n, c) = x.shape();
        let p = n.min(c);
        let mut work = x.clone();
        let mut tau = vec![0.0; p];
        let mut j0 = 0;
        while j0 < p {
            let jb = PANEL.min(p - j0);
            // Unblocked factorization of the panel.
            for j in j0..j0 + jb {
                let (t, beta) = householder(&mut work.col_mut(j)[j..]);
                tau[j] = t;
                if t != 0.0 {
                    let v: Vec<f64> = work.col(j)[j + 1..].to_vec();
                    for k in j + 1..j0 + jb {
                        let col = &mut work.col_mut(k)[j..];
                        let f = t * (col[0] + dot(&v, &col[1..]));
                        col[0] -= f;
                        for (cv, vv) in col[1..].iter_mut().zip(&v) {
                            *cv -= f * vv;
                        }
                    }
                }
                work[(j, j)] = beta;
            }
            let trailing = c - (j0 + jb);
            if trailing > 0 {
                let (v, t) = Self::panel_wy(&work, &tau, j0, jb);
                // C ← (I − V T Vᵀ)ᵀ C = C − V Tᵀ (Vᵀ C)
                let rows = n - j0;
                let mut w = DenseMatrix::zeros(jb, trailing);
                gemm_into(
                    &mut w,
                    0,
                    0,
                    1.0,
                    v.view().t(),
                    work.sub_view(j0, j0 + jb, rows, trailing),
                    0.0,
                );
                let tw = t.t_matmul(&w);
                gemm_into(&mut work, j0, j0 + jb, -1.0, v.view(), tw.view(), 1.0);
            }
            j0 += jb;
        }

        let mut r = DenseMatrix::zeros(p, c);
        for k in 0..c {
            for i in 0..p.min(k + 1) {
                r[(i, k)] = work[(i, k)];
            }
        }
        let mut signs = vec![1.0; p];
        for (i, sign) in signs.iter_mut().enumerate() {
            if r[(i, i)] < 0.0 {
                *sign = -1.0;
                for k in i..c {
                    r[(i, k)] = -r[(i, k)];
                }
            }
        }
        Self {
            packed: work,
            tau,
            r,
            signs,
        }
    }

    /// Explicit unit-lower-trapezoidal `V` ((n−j0) × jb) and upper triangular `T`
    /// with `H_{j0} ⋯ H_{j0+jb−1} = I − V T Vᵀ`.
    fn panel_wy(
        work: &DenseMatrix,
        tau: &[f64],
        j0: usize,
        jb: usize,
    ) -> (DenseMatrix, DenseMatrix) {
        let rows = work.nrows() - j0;
        let mut v = DenseMatrix::zeros(rows, jb);
        for l in 0..jb {
            let col = v.col_mut(l);
            col[l] = 1.0;
            col[l + 1..].copy_from_slice(&work.col(j0 + l)[j0 + l + 1..]);
        }
        let vtv = v.t_matmul(&v);
        let mut t = DenseMatrix::zeros(jb, jb);
        for i in 0..jb {
            let ti = tau[j0 + i];
            t[(i, i)] = ti;
            // T[0..i, i] = −τ_i T[0..i, 0..i] (V[:, 0..i]ᵀ v_i)
            for a in 0..i {
                let mut s = 0.0;
                for b in a..i {
                    s += t[(a, b)] * vtv[(b, i)];
                }
                t[(a, i)] = -ti * s;
            }
        }
        (v, t)
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn into_r(self) -> DenseMatrix {
        self.r
    }

    /// `Q · m` for `m` with `p` rows, where `Q` is the thin `n × p` factor.
    pub fn apply_q(&self, m: &DenseMatrix) -> DenseMatrix {
        let (n, c) = self.packed.shape();
        let p = n.min(c);
        assert_eq!(m.nrows(), p, "apply_q expects p rows");
        let k = m.ncols();
        let mut out = DenseMatrix::zeros(n, k);
        for j in 0..k {
            for i in 0..p {
                out[(i, j)] = self.signs[i] * m[(i, j)];
            }
        }
        if k == 0 {
            return out;
        }
        let panels: Vec<usize> = (0..p).step_by(PANEL).collect();
        for &j0 in panels.iter().rev() {
            let jb = PANEL.min(p - j0);
            let (v, t) = Self::panel_wy(&self.packed, &self.tau, j0, jb);
            let rows = n - j0;
            let mut w = DenseMatrix::zeros(jb, k);
            gemm_into(
                &mut w,
                0,
                0,
                1.0,
                v.view().t(),
                out.sub_view(j0, 0, rows, k),
                0.0,
            );
            let tw = t.matmul(&w);
            gemm_into(&mut out, j0, 0, -1.0, v.view(), tw.view(), 1.0);
        }
        out
    }

    /// Thin `Q` (n × p).
    pub fn q(&self) -> DenseMatrix {
        let p = self.r.nrows();
        self.apply_q(&DenseMatrix::identity(p))
    }
}

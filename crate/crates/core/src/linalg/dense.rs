//! Column-major dense matrices and the handful of BLAS-like kernels the solvers need.

use std::fmt;
use std::ops::{Index, IndexMut};

use super::LinalgError;

/// Dense real matrix stored column-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Borrowed strided window into a column-major buffer.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    data: &'a [f64],
    offset: usize,
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> View<'a> {
    pub(crate) fn t(self) -> View<'a> {
        View {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                op: "from_col_major",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self::from_fn(n_rows, n_cols, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            offset: 0,
            rows: self.rows,
            cols: self.cols,
            row_stride: 1,
            col_stride: self.rows as isize,
        }
    }

    pub(crate) fn sub_view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> View<'_> {
        assert!(
            r0 + rows <= self.rows && c0 + cols <= self.cols,
            "sub_view out of bounds"
        );
        View {
            data: &self.data,
            offset: r0 + c0 * self.rows,
            rows,
            cols,
            row_stride: 1,
            col_stride: self.rows as isize,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copy of the `rows × cols` block starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(
            r0 + rows <= self.rows && c0 + cols <= self.cols,
            "submatrix out of bounds"
        );
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            out.col_mut(j)
                .copy_from_slice(&self.col(c0 + j)[r0..r0 + rows]);
        }
        out
    }

    pub fn columns(&self, c0: usize, cols: usize) -> Self {
        assert!(c0 + cols <= self.cols, "column range out of bounds");
        Self {
            rows: self.rows,
            cols,
            data: self.data[c0 * self.rows..(c0 + cols) * self.rows].to_vec(),
        }
    }

    /// Writes `block` into `self` with its upper-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "set_block out of bounds"
        );
        for j in 0..block.cols {
            let rows = self.rows;
            self.data[(c0 + j) * rows + r0..(c0 + j) * rows + r0 + block.rows]
                .copy_from_slice(block.col(j));
        }
    }

    /// Appends the columns of `other`; row counts must agree.
    pub fn append_columns(&mut self, other: &DenseMatrix) {
        if self.cols == 0 && self.data.is_empty() {
            self.rows = other.rows;
        }
        assert_eq!(self.rows, other.rows, "append_columns row mismatch");
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
    }

    pub fn hstack(parts: &[&DenseMatrix]) -> Self {
        let rows = parts.first().map_or(0, |p| p.rows);
        let mut out = Self::zeros(rows, 0);
        for p in parts {
            out.append_columns(p);
        }
        out
    }

    pub fn block_diag(parts: &[&DenseMatrix]) -> Self {
        let rows = parts.iter().map(|p| p.rows).sum();
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for p in parts {
            out.set_block(r, c, p);
            r += p.rows;
            c += p.cols;
        }
        out
    }

    /// Zero-pads to `rows × cols`, keeping `self` in the upper-left corner.
    pub fn padded(&self, rows: usize, cols: usize) -> Self {
        assert!(
            rows >= self.rows && cols >= self.cols,
            "padded target smaller than source"
        );
        if rows == self.rows && cols == self.cols {
            return self.clone();
        }
        let mut out = Self::zeros(rows, cols);
        out.set_block(0, 0, self);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * x` over the upper-left `x.shape()` block of `self`.
    pub fn axpy_block(&mut self, alpha: f64, x: &DenseMatrix) {
        assert!(
            x.rows <= self.rows && x.cols <= self.cols,
            "axpy_block shape"
        );
        for j in 0..x.cols {
            let rows = self.rows;
            let dst = &mut self.data[j * rows..j * rows + x.rows];
            for (d, s) in dst.iter_mut().zip(x.col(j)) {
                *d += alpha * s;
            }
        }
    }

    /// `self += alpha * x`; shapes must match.
    pub fn axpy(&mut self, alpha: f64, x: &DenseMatrix) {
        assert_eq!(self.shape(), x.shape(), "axpy shape mismatch");
        for (d, s) in self.data.iter_mut().zip(&x.data) {
            *d += alpha * s;
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        gemm_into(&mut out, 0, 0, 1.0, self.view(), other.view(), 0.0);
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Self {
        let mut out = Self::zeros(self.cols, other.cols);
        gemm_into(&mut out, 0, 0, 1.0, self.view().t(), other.view(), 0.0);
        out
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Self {
        let mut out = Self::zeros(self.rows, other.rows);
        gemm_into(&mut out, 0, 0, 1.0, self.view(), other.view().t(), 0.0);
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Symmetric part `(M + Mᵀ)/2`; `self` must be square.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// `C[r0.., c0..] = alpha * A * B + beta * C[r0.., c0..]` for strided views.
pub(crate) fn gemm_into(
    c: &mut DenseMatrix,
    r0: usize,
    c0: usize,
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "gemm inner dimension mismatch");
    assert!(
        r0 + m <= c.rows && c0 + n <= c.cols,
        "gemm output out of bounds"
    );
    if m == 0 || n == 0 {
        return;
    }
    check_view(&a);
    check_view(&b);
    let ldc = c.rows;
    if k == 0 {
        for j in c0..c0 + n {
            for x in &mut c.data[j * ldc + r0..j * ldc + r0 + m] {
                *x *= beta;
            }
        }
        return;
    }
    // SAFETY: every index touched by dgemm lies inside the checked view extents,
    // and `c` is exclusively borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr().add(b.offset),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr().add(r0 + c0 * ldc),
            1,
            ldc as isize,
        );
    }
}

fn check_view(v: &View<'_>) {
    if v.rows == 0 || v.cols == 0 {
        return;
    }
    let last = v.offset as isize
        + (v.rows as isize - 1) * v.row_stride
        + (v.cols as isize - 1) * v.col_stride;
    assert!(
        last >= 0 && (last as usize) < v.data.len(),
        "view exceeds buffer"
    );
}

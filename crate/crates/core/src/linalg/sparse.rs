//! Compressed sparse row matrices and sparse-times-dense kernels.
//!
//! Every kernel accumulates each output entry in increasing index order, so
//! results are bit-reproducible run to run. The optional parallel path splits
//! work by output column and keeps that per-entry order.

use rayon::prelude::*;

use super::{parallel, DenseMatrix, LinalgError};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let invalid = |reason: String| Err(LinalgError::InvalidSparse(reason));
        if row_ptr.len() != n_rows + 1 {
            return invalid(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n_rows + 1
            ));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return invalid("row_ptr must start at 0 and end at nnz".into());
        }
        if col_idx.len() != values.len() {
            return invalid("col_idx and values lengths differ".into());
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if lo > hi {
                return invalid(format!("row_ptr decreases at row {i}"));
            }
            let row = &col_idx[lo..hi];
            if row.iter().any(|&c| c >= n_cols) {
                return invalid(format!("column index out of range in row {i}"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(format!("column indices not strictly increasing in row {i}"));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        if let Some(&(i, j, _)) = triplets
            .iter()
            .find(|&&(i, j, _)| i >= n_rows || j >= n_cols)
        {
            return Err(LinalgError::InvalidSparse(format!(
                "entry ({i}, {j}) outside {n_rows}x{n_cols}"
            )));
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (i, j, v) = triplets[t];
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Stores every entry of `m` whose absolute value exceeds `drop_tol`.
    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: m.nrows(),
            n_cols: m.ncols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] += v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            let p = next[j];
            col_idx[p] = i;
            values[p] = v;
            next[j] += 1;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|` over stored entries (and their mirrors).
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric to `tol` relative to the largest entry magnitude.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.asymmetry() <= tol * scale.max(f64::MIN_POSITIVE)
    }

    /// `A · X`.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.n_cols != x.nrows() {
            return Err(LinalgError::DimensionMismatch {
                op: "spmm",
                left: (self.n_rows, self.n_cols),
                right: x.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n_rows, x.ncols());
        if self.n_rows == 0 {
            return Ok(out);
        }
        let kernel = |j: usize, dst: &mut [f64]| {
            let src = x.col(j);
            for (i, d) in dst.iter_mut().enumerate() {
                let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut acc = 0.0;
                for p in lo..hi {
                    acc += self.values[p] * src[self.col_idx[p]];
                }
                *d = acc;
            }
        };
        let rows = self.n_rows;
        if parallel::enabled() && x.ncols() > 1 {
            out.as_mut_slice()
                .par_chunks_mut(rows)
                .enumerate()
                .for_each(|(j, dst)| kernel(j, dst));
        } else {
            out.as_mut_slice()
                .chunks_mut(rows)
                .enumerate()
                .for_each(|(j, dst)| kernel(j, dst));
        }
        Ok(out)
    }

    /// `Aᵀ · X` without forming the transpose.
    pub fn spmm_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.n_rows != x.nrows() {
            return Err(LinalgError::DimensionMismatch {
                op: "spmm_transpose",
                left: (self.n_cols, self.n_rows),
                right: x.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n_cols, x.ncols());
        if self.n_cols == 0 {
            return Ok(out);
        }
        let kernel = |j: usize, dst: &mut [f64]| {
            let src = x.col(j);
            for (p, &xp) in src.iter().enumerate() {
                let (lo, hi) = (self.row_ptr[p], self.row_ptr[p + 1]);
                for q in lo..hi {
                    dst[self.col_idx[q]] += self.values[q] * xp;
                }
            }
        };
        let cols = self.n_cols;
        if parallel::enabled() && x.ncols() > 1 {
            out.as_mut_slice()
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(j, dst)| kernel(j, dst));
        } else {
            out.as_mut_slice()
                .chunks_mut(cols)
                .enumerate()
                .for_each(|(j, dst)| kernel(j, dst));
        }
        Ok(out)
    }

    /// `X · A` for dense `X` on the left.
    pub fn left_mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if x.ncols() != self.n_rows {
            return Err(LinalgError::DimensionMismatch {
                op: "dense_times_sparse",
                left: x.shape(),
                right: (self.n_rows, self.n_cols),
            });
        }
        let mut out = DenseMatrix::zeros(x.nrows(), self.n_cols);
        let rows = x.nrows();
        for (p, j, v) in self.triplets() {
            let src = x.col(p);
            let dst = &mut out.as_mut_slice()[j * rows..(j + 1) * rows];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`SparseMatrix::spmm`].
pub fn spmm(a: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    a.spmm(x)
}

/// Free-function form of [`SparseMatrix::spmm_transpose`].
pub fn spmm_transpose(a: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    a.spmm_transpose(x)
}

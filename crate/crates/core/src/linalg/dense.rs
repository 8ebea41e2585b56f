use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, norm_sq};

/// Immutable dense `m × n` matrix.
///
/// Entries are stored row-major together with a column-major copy so that
/// both row sweeps (`αᵢᵀx`) and column sweeps (`βⱼᵀr`) read contiguous
/// memory. Squared row norms, squared column norms and the squared
/// Frobenius norm are computed once at construction.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    data_t: Vec<f64>,
    row_sqnorms: Vec<f64>,
    col_sqnorms: Vec<f64>,
    frob_sq: f64,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::usage(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::usage(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }

        let mut data_t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data_t[j * rows + i] = data[i * cols + j];
            }
        }
        let row_sqnorms: Vec<f64> = data.chunks_exact(cols).map(norm_sq).collect();
        let col_sqnorms: Vec<f64> = data_t.chunks_exact(rows).map(norm_sq).collect();
        let frob_sq = row_sqnorms.iter().sum();

        Ok(DenseMatrix {
            rows,
            cols,
            data,
            data_t,
            row_sqnorms,
            col_sqnorms,
            frob_sq,
        })
    }

    /// Builds a matrix from column-major values (MatrixMarket array order).
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::usage(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        let mut row_major = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                row_major[i * cols + j] = data[j * rows + i];
            }
        }
        Self::from_row_major(rows, cols, row_major)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::usage("ragged rows"));
        }
        Self::from_row_major(m, n, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Row `i` as a contiguous slice (`αᵢᵀ`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as a contiguous slice (`βⱼ`).
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data_t[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row_sqnorms(&self) -> &[f64] {
        &self.row_sqnorms
    }

    pub fn col_sqnorms(&self) -> &[f64] {
        &self.col_sqnorms
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn col_major(&self) -> &[f64] {
        &self.data_t
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::usage(format!(
                "matvec: vector has length {}, matrix has {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// `Aᵀ r`.
    pub fn matvec_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.rows {
            return Err(Error::usage(format!(
                "matvec_transpose: vector has length {}, matrix has {} rows",
                r.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        self.matvec_transpose_into(r, &mut out);
        Ok(out)
    }

    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    pub(crate) fn matvec_transpose_into(&self, r: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.data_t.chunks_exact(self.rows)) {
            *o = dot(col, r);
        }
    }

    /// `b − A x`.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.matvec(x)?;
        if b.len() != self.rows {
            return Err(Error::usage("residual: right-hand side length mismatch"));
        }
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data: self.data_t.clone(),
            data_t: self.data.clone(),
            row_sqnorms: self.col_sqnorms.clone(),
            col_sqnorms: self.row_sqnorms.clone(),
            frob_sq: self.frob_sq,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_row_major(idx.len(), self.cols, data)
    }

    pub fn select_cols(&self, idx: &[usize]) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self::from_col_major(self.rows, idx.len(), data)
    }

    /// Index of the first all-zero row, if any.
    pub fn zero_row(&self) -> Option<usize> {
        self.row_sqnorms.iter().position(|&s| s == 0.0)
    }

    pub fn zero_col(&self) -> Option<usize> {
        self.col_sqnorms.iter().position(|&s| s == 0.0)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{}, ‖A‖_F²={:e})", self.rows, self.cols, self.frob_sq)
    }
}

use crate::linalg::vecops::{axpy, dot};
use crate::linalg::DenseMatrix;

/// A matrix that can be applied forwards and transposed without being formed.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = M x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Mᵀ y`
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        DenseMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        DenseMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out);
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        self.matvec_transpose_into(y, out);
    }
}

/// Row submatrix `A_{I,:}` borrowed from a parent matrix.
#[derive(Clone, Copy, Debug)]
pub struct RowBlock<'a> {
    pub matrix: &'a DenseMatrix,
    pub rows: &'a [usize],
}

impl LinearOperator for RowBlock<'_> {
    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, &i) in out.iter_mut().zip(self.rows) {
            *o = dot(self.matrix.row(i), x);
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&yi, &i) in y.iter().zip(self.rows) {
            axpy(yi, self.matrix.row(i), out);
        }
    }
}

/// Column submatrix `A_{:,J}` borrowed from a parent matrix.
#[derive(Clone, Copy, Debug)]
pub struct ColBlock<'a> {
    pub matrix: &'a DenseMatrix,
    pub cols: &'a [usize],
}

impl LinearOperator for ColBlock<'_> {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&xj, &j) in x.iter().zip(self.cols) {
            axpy(xj, self.matrix.col(j), out);
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for (o, &j) in out.iter_mut().zip(self.cols) {
            *o = dot(self.matrix.col(j), y);
        }
    }
}

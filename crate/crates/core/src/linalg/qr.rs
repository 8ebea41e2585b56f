use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, norm};
use crate::linalg::DenseMatrix;

/// Smallest admissible `|R_jj|` relative to the largest.
const RANK_RTOL: f64 = 1e-10;

/// Orthonormal basis of the column span of `m` (Householder QR, thin `Q`).
///
/// Columns of the result are signed so that the implied `R` has a positive
/// diagonal, which makes the factorization unique. Fails with a generation
/// error when the columns are numerically dependent.
pub fn orthonormalize_columns(m: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = m.nrows();
    let cols = m.ncols();
    if cols > rows {
        return Err(Error::Generation(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        )));
    }

    // Column-major working copy; reflected in place.
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.col(j).to_vec()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut diag = Vec::with_capacity(cols);

    for k in 0..cols {
        let x = &work[k][k..];
        let xnorm = norm(x);
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = norm(&v);
        if vnorm > 0.0 {
            v.iter_mut().for_each(|vi| *vi /= vnorm);
        }
        for col in work.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let s = 2.0 * dot(&v, tail);
            tail.iter_mut().zip(&v).for_each(|(t, vi)| *t -= s * vi);
        }
        diag.push(alpha);
        reflectors.push(v);
    }

    let largest = diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    let smallest = diag.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    if largest == 0.0 || smallest <= RANK_RTOL * largest {
        return Err(Error::Generation(format!(
            "columns are numerically dependent (|R| ratio {:e})",
            if largest > 0.0 { smallest / largest } else { 0.0 }
        )));
    }

    // Q = H_0 ⋯ H_{r-1} [I; 0], built column by column.
    let mut q: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; rows];
            e[j] = 1.0;
            e
        })
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        for col in q.iter_mut() {
            let tail = &mut col[k..];
            let s = 2.0 * dot(v, tail);
            tail.iter_mut().zip(v).for_each(|(t, vi)| *t -= s * vi);
        }
    }
    for (col, d) in q.iter_mut().zip(&diag) {
        if *d < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
    }

    DenseMatrix::from_col_major(rows, cols, q.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_defect(q: &DenseMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..q.ncols() {
            for j in 0..q.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(q.col(i), q.col(j)) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn scaled_axes_become_identity() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let q = orthonormalize_columns(&m).unwrap();
        assert_eq!(q.row_major(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn identical_columns_fail() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert!(matches!(orthonormalize_columns(&m), Err(Error::Generation(_))));
    }

    #[test]
    fn pseudo_random_block_is_orthonormal_and_spans_input() {
        let m = DenseMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.1 * j as f64)
            .unwrap();
        let q = orthonormalize_columns(&m).unwrap();
        assert!(gram_defect(&q) < 1e-10);
        // Each input column is reproduced by its projection onto span(Q).
        for j in 0..3 {
            let c = m.col(j);
            let mut proj = [0.0; 5];
            for k in 0..3 {
                let w = dot(q.col(k), c);
                proj.iter_mut().zip(q.col(k)).for_each(|(p, qk)| *p += w * qk);
            }
            let err: f64 = proj.iter().zip(c).map(|(p, ci)| (p - ci).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "column {j} not in span: {err}");
        }
    }
}

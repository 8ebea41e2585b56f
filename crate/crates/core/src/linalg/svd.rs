use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, norm_sq};
use crate::linalg::DenseMatrix;

/// Largest `min(m, n)` accepted by the dense SVD.
pub const SVD_MAX_DIM: usize = 512;

/// Singular values below `ZERO_SIGMA_RTOL · σ_max` count as zero.
pub const ZERO_SIGMA_RTOL: f64 = 1e-10;

const ORTHO_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ`, `s` nonincreasing, `U: m×k`, `V: n×k`, `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    /// Nonzero singular values (relative cutoff `ZERO_SIGMA_RTOL`).
    pub fn nonzero(&self) -> Vec<f64> {
        let cutoff = self.s.first().copied().unwrap_or(0.0) * ZERO_SIGMA_RTOL;
        self.s.iter().copied().filter(|&s| s > cutoff && s > 0.0).collect()
    }

    /// Minimum-norm least-squares solution `A†b`.
    pub fn pinv_apply(&self, b: &[f64]) -> Vec<f64> {
        let cutoff = self.s.first().copied().unwrap_or(0.0) * ZERO_SIGMA_RTOL;
        let n = self.v.nrows();
        let mut x = vec![0.0; n];
        for (k, &s) in self.s.iter().enumerate() {
            if s <= cutoff || s == 0.0 {
                continue;
            }
            let w = dot(self.u.col(k), b) / s;
            x.iter_mut().zip(self.v.col(k)).for_each(|(xi, vi)| *xi += w * vi);
        }
        x
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rotates column pairs of a working copy until all pairs are numerically
/// orthogonal; the column norms are then the singular values. Wide inputs are
/// transposed first so the rotations act on `min(m, n)` columns.
pub fn jacobi_svd(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = (a.nrows(), a.ncols());
    if m.min(n) > SVD_MAX_DIM {
        return Err(Error::SizeGuard(format!(
            "dense SVD limited to min(m, n) <= {SVD_MAX_DIM}, got {m}x{n}; skip bound verification"
        )));
    }
    let transposed = m < n;
    let (p, q) = if transposed { (n, m) } else { (m, n) };

    // Columns of the (possibly transposed) matrix.
    let mut w: Vec<Vec<f64>> = (0..q)
        .map(|j| if transposed { a.row(j).to_vec() } else { a.col(j).to_vec() })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let alpha = norm_sq(&w[i]);
                let beta = norm_sq(&w[j]);
                let gamma = dot(&w[i], &w[j]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(k, c)| (norm_sq(c).sqrt(), k)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut left = Vec::with_capacity(p * q);
    let mut right = Vec::with_capacity(q * q);
    let mut s = Vec::with_capacity(q);
    for &(sigma, k) in &order {
        s.push(sigma);
        if sigma > 0.0 {
            left.extend(w[k].iter().map(|x| x / sigma));
        } else {
            left.extend(std::iter::repeat_n(0.0, p));
        }
        right.extend_from_slice(&v[k]);
    }
    let big = DenseMatrix::from_col_major(p, q, left)?;
    let small = DenseMatrix::from_col_major(q, q, right)?;
    let (u, v) = if transposed { (small, big) } else { (big, small) };
    Ok(Svd { u, s, v })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (xi, yi) = (*x, *y);
        *x = c * xi - s * yi;
        *y = s * xi + c * yi;
    }
}

/// Nonzero singular values of `a` in nonincreasing order.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(jacobi_svd(a)?.nonzero())
}

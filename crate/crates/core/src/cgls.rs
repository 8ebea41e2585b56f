//! CGLS: conjugate gradients on the normal equations `MᵀM w = Mᵀ rhs`.
//!
//! Started from `w = 0` the iterates stay in range(Mᵀ), so the limit is the
//! minimum-norm least-squares solution `M† rhs`. This is what the block
//! projections of GBK, RBK and RBCD need, and it doubles as the reference
//! solver for `A†b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vecops::{axpy, norm_sq};
use crate::linalg::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CglsConfig {
    /// Stop once `‖Mᵀ(rhs − Mw)‖ <= rel_tol · ‖Mᵀ rhs‖`.
    pub rel_tol: f64,
    /// `None` means `2·min(rows, cols) + 10`.
    pub max_iters: Option<usize>,
}

impl Default for CglsConfig {
    fn default() -> Self {
        CglsConfig {
            rel_tol: 1e-12,
            max_iters: None,
        }
    }
}

impl CglsConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        CglsConfig {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn iteration_budget(&self, rows: usize, cols: usize) -> usize {
        self.max_iters.unwrap_or(2 * rows.min(cols) + 10)
    }
}

#[derive(Clone, Debug)]
pub struct CglsSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖Mᵀ(rhs − Mw)‖ / ‖Mᵀ rhs‖` (recurrence value).
    pub rel_residual: f64,
}

pub fn cgls<M: LinearOperator + ?Sized>(op: &M, rhs: &[f64], cfg: &CglsConfig) -> Result<Vec<f64>> {
    cgls_detailed(op, rhs, cfg).map(|s| s.x)
}

pub fn cgls_detailed<M: LinearOperator + ?Sized>(op: &M, rhs: &[f64], cfg: &CglsConfig) -> Result<CglsSolution> {
    let (rows, cols) = (op.nrows(), op.ncols());
    if rhs.len() != rows {
        return Err(Error::usage(format!(
            "cgls: right-hand side has length {}, operator has {rows} rows",
            rhs.len()
        )));
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(Error::usage("cgls: rel_tol must be positive"));
    }
    let budget = cfg.iteration_budget(rows, cols);
    if budget == 0 {
        return Err(Error::usage("cgls: max_iters must be at least 1"));
    }

    let mut x = vec![0.0; cols];
    let mut r = rhs.to_vec();
    let mut s = vec![0.0; cols];
    op.apply_transpose(&r, &mut s);
    let gamma0 = norm_sq(&s);
    if gamma0 == 0.0 {
        return Ok(CglsSolution {
            x,
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = cfg.rel_tol * cfg.rel_tol * gamma0;

    let mut p = s.clone();
    let mut q = vec![0.0; rows];
    let mut gamma = gamma0;
    for k in 1..=budget {
        op.apply(&p, &mut q);
        let delta = norm_sq(&q);
        if delta == 0.0 {
            // p ∈ null(M): only reachable once the gradient has vanished numerically.
            return Ok(CglsSolution {
                x,
                iterations: k - 1,
                rel_residual: (gamma / gamma0).sqrt(),
            });
        }
        let alpha = gamma / delta;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        op.apply_transpose(&r, &mut s);
        let gamma_new = norm_sq(&s);
        if gamma_new <= target {
            return Ok(CglsSolution {
                x,
                iterations: k,
                rel_residual: (gamma_new / gamma0).sqrt(),
            });
        }
        let beta = gamma_new / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_new;
    }
    Err(Error::Subsolver {
        iterations: budget,
        residual: (gamma / gamma0).sqrt(),
    })
}

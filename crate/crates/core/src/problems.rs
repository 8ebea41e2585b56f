//! Test problem generators and the on-disk instance format.
//!
//! Every random quantity comes from ChaCha20 seeded with the instance seed;
//! the matrix, the generating solution and the noise draw use separate
//! streams (0, 1, 2), so changing one never shifts another.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cgls::{cgls, CglsConfig};
use crate::error::{Error, Result};
use crate::linalg::vecops::{axpy, dist, dot, norm, scale};
use crate::linalg::{orthonormalize_columns, DenseMatrix};
use crate::mtx;

const MATRIX_STREAM: u64 = 0;
const SOLUTION_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const RETRIES: usize = 3;

/// Tolerance of the least-norm / projection solves done at generation time.
pub const ORACLE_TOL: f64 = 1e-12;

pub const DEFAULT_NOISE_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase")]
pub enum ProblemKind {
    /// I.i.d. standard normal entries.
    Randn,
    /// `UΣVᵀ` with prescribed singular values.
    Smatrix { r: usize, sigma1: f64, sigma2: f64 },
    /// Supplied from outside the generators.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(flatten)]
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub consistent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
}

impl InstanceMeta {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::usage("instance dimensions must be positive"));
        }
        if let ProblemKind::Smatrix { r, sigma1, sigma2 } = self.kind {
            check_smatrix_params(self.m, self.n, r, sigma1, sigma2)?;
        }
        if let Some(s) = self.noise_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::usage(format!("noise scale must be finite and positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Parses and validates a `meta.json` document.
pub fn parse_meta(text: &str) -> Result<InstanceMeta> {
    let meta: InstanceMeta = serde_json::from_str(text)?;
    meta.validate()?;
    Ok(meta)
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    /// `A†b`: least-norm solution (consistent) or least-squares solution.
    pub x_star: Vec<f64>,
    pub consistent: bool,
    pub seed: u64,
    pub meta: InstanceMeta,
}

/// Everything needed to regenerate an instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub inconsistent: bool,
    pub noise_scale: f64,
}

impl ProblemSpec {
    pub fn randn(m: usize, n: usize, seed: u64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Randn,
            m,
            n,
            seed,
            inconsistent: false,
            noise_scale: DEFAULT_NOISE_SCALE,
        }
    }

    pub fn smatrix(m: usize, n: usize, r: usize, sigma1: f64, sigma2: f64, seed: u64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Smatrix { r, sigma1, sigma2 },
            ..Self::randn(m, n, seed)
        }
    }

    pub fn inconsistent(self, noise_scale: f64) -> Self {
        ProblemSpec {
            inconsistent: true,
            noise_scale,
            ..self
        }
    }
}

/// Builds the matrix and right-hand side described by `spec`.
pub fn generate(spec: &ProblemSpec) -> Result<ProblemInstance> {
    let a = match spec.kind {
        ProblemKind::Randn => gen_randn(spec.m, spec.n, spec.seed)?,
        ProblemKind::Smatrix { r, sigma1, sigma2 } => gen_smatrix(spec.m, spec.n, r, sigma1, sigma2, spec.seed)?,
        ProblemKind::Custom => return Err(Error::usage("custom instances are loaded, not generated")),
    };
    let mut inst = if spec.inconsistent {
        make_inconsistent(a, spec.seed, spec.noise_scale)?
    } else {
        make_consistent(a, spec.seed)?
    };
    inst.meta.kind = spec.kind;
    Ok(inst)
}

fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `m × n` matrix of i.i.d. standard normal entries, filled row by row.
pub fn gen_randn(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::usage("matrix dimensions must be positive"));
    }
    let len = m
        .checked_mul(n)
        .ok_or_else(|| Error::usage("matrix dimensions overflow"))?;
    let mut rng = stream(seed, MATRIX_STREAM);
    DenseMatrix::from_row_major(m, n, normals(&mut rng, len))
}

fn check_smatrix_params(m: usize, n: usize, r: usize, sigma1: f64, sigma2: f64) -> Result<()> {
    if r < 2 || r > m.min(n) {
        return Err(Error::usage(format!("smatrix rank r={r} must satisfy 2 <= r <= min(m, n)")));
    }
    if !(sigma2 > 0.0 && sigma1 > sigma2 && sigma1.is_finite()) {
        return Err(Error::usage(format!(
            "smatrix needs sigma1 > sigma2 > 0, got sigma1={sigma1}, sigma2={sigma2}"
        )));
    }
    Ok(())
}

/// `A = UΣVᵀ` with orthonormalized Gaussian `U` (`m × r`) and `V` (`n × r`).
///
/// The diagonal of `Σ` holds `r − 2` uniform draws from `(σ₂, σ₁)` followed
/// by `σ₂` and `σ₁`.
pub fn gen_smatrix(m: usize, n: usize, r: usize, sigma1: f64, sigma2: f64, seed: u64) -> Result<DenseMatrix> {
    check_smatrix_params(m, n, r, sigma1, sigma2)?;
    let mut rng = stream(seed, MATRIX_STREAM);
    let mut last = None;
    for _ in 0..=RETRIES {
        let u = DenseMatrix::from_row_major(m, r, normals(&mut rng, m * r))?;
        let v = DenseMatrix::from_row_major(n, r, normals(&mut rng, n * r))?;
        let (u, v) = match (orthonormalize_columns(&u), orthonormalize_columns(&v)) {
            (Ok(u), Ok(v)) => (u, v),
            (Err(e), _) | (_, Err(e)) => {
                last = Some(e);
                continue;
            }
        };
        let dist = Uniform::new(sigma2, sigma1).map_err(|e| Error::usage(e.to_string()))?;
        let mut sigma: Vec<f64> = (0..r - 2).map(|_| rng.sample(dist)).collect();
        sigma.push(sigma2);
        sigma.push(sigma1);

        let mut us = vec![0.0; m * r];
        for i in 0..m {
            for k in 0..r {
                us[i * r + k] = u.get(i, k) * sigma[k];
            }
        }
        return DenseMatrix::from_fn(m, n, |i, j| dot(&us[i * r..(i + 1) * r], v.row(j)));
    }
    Err(last.unwrap_or_else(|| Error::Generation("smatrix orthonormalization failed".into())))
}

fn oracle_cfg(a: &DenseMatrix) -> CglsConfig {
    CglsConfig {
        rel_tol: ORACLE_TOL,
        max_iters: Some(4 * a.nrows().min(a.ncols()) + 50),
    }
}

/// Minimum-norm least-squares solution `A†b` at [`ORACLE_TOL`].
pub fn least_norm_solution(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    cgls(a, b, &oracle_cfg(a))
}

/// Replaces `x` by `A†(Ax)` unless `x` already lies in range(Aᵀ).
fn reference_solution(a: &DenseMatrix, x: Vec<f64>, ax: &[f64]) -> Result<Vec<f64>> {
    let w = least_norm_solution(a, ax)?;
    if dist(&w, &x) <= 1e-8 * norm(&x) {
        Ok(x)
    } else {
        Ok(w)
    }
}

fn custom_meta(a: &DenseMatrix, seed: u64, consistent: bool, noise_scale: Option<f64>) -> InstanceMeta {
    InstanceMeta {
        kind: ProblemKind::Custom,
        m: a.nrows(),
        n: a.ncols(),
        seed,
        consistent,
        noise_scale,
    }
}

/// `b = Ax*` with standard-normal `x*`; `x_star` is the least-norm solution.
pub fn make_consistent(a: DenseMatrix, seed: u64) -> Result<ProblemInstance> {
    let mut rng = stream(seed, SOLUTION_STREAM);
    let x = normals(&mut rng, a.ncols());
    let b = a.matvec(&x)?;
    let x_star = reference_solution(&a, x, &b)?;
    let meta = custom_meta(&a, seed, true, None);
    Ok(ProblemInstance {
        a,
        b,
        x_star,
        consistent: true,
        seed,
        meta,
    })
}

/// `b = Ax* + δb` with `Aᵀδb = 0` and `‖δb‖ = noise_scale·‖Ax*‖`.
///
/// `δb` is a Gaussian draw minus its least-squares fit `A·A†z`.
pub fn make_inconsistent(a: DenseMatrix, seed: u64, noise_scale: f64) -> Result<ProblemInstance> {
    if !(noise_scale.is_finite() && noise_scale > 0.0) {
        return Err(Error::usage(format!("noise scale must be finite and positive, got {noise_scale}")));
    }
    let mut rng = stream(seed, SOLUTION_STREAM);
    let x = normals(&mut rng, a.ncols());
    let b_range = a.matvec(&x)?;
    let x_star = reference_solution(&a, x, &b_range)?;

    let mut noise_rng = stream(seed, NOISE_STREAM);
    let cfg = oracle_cfg(&a);
    let mut delta = None;
    for _ in 0..=RETRIES {
        let z = normals(&mut noise_rng, a.nrows());
        let w = cgls(&a, &z, &cfg).map_err(|e| Error::Generation(format!("null-space projection: {e}")))?;
        let mut d = z.clone();
        axpy(-1.0, &a.matvec(&w)?, &mut d);
        let dn = norm(&d);
        if dn <= 1e-8 * norm(&z) {
            continue;
        }
        if norm(&a.matvec_transpose(&d)?) > 1e-8 * a.frob_sq().sqrt() * dn {
            continue;
        }
        delta = Some(d);
        break;
    }
    let mut delta =
        delta.ok_or_else(|| Error::Generation("null space of Aᵀ is empty or unreachable".into()))?;
    let target = noise_scale * norm(&b_range);
    scale(target / norm(&delta), &mut delta);

    let mut b = b_range;
    axpy(1.0, &delta, &mut b);
    let meta = custom_meta(&a, seed, false, Some(noise_scale));
    Ok(ProblemInstance {
        a,
        b,
        x_star,
        consistent: false,
        seed,
        meta,
    })
}

pub const A_FILE: &str = "A.mtx";
pub const B_FILE: &str = "b.mtx";
pub const XSTAR_FILE: &str = "xstar.mtx";
pub const META_FILE: &str = "meta.json";

impl ProblemInstance {
    /// Writes `A.mtx`, `b.mtx`, `xstar.mtx` and `meta.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        mtx::save_matrix(dir.join(A_FILE), &self.a)?;
        mtx::save_vector(dir.join(B_FILE), &self.b)?;
        mtx::save_vector(dir.join(XSTAR_FILE), &self.x_star)?;
        let mut json = serde_json::to_string_pretty(&self.meta)?;
        json.push('\n');
        fs::write(dir.join(META_FILE), json)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = parse_meta(&fs::read_to_string(dir.join(META_FILE))?)?;
        let a = mtx::load_matrix(dir.join(A_FILE))?;
        let b = mtx::load_vector(dir.join(B_FILE))?;
        let x_star = mtx::load_vector(dir.join(XSTAR_FILE))?;
        if (a.nrows(), a.ncols()) != (meta.m, meta.n) {
            return Err(Error::usage(format!(
                "A is {}x{} but meta.json says {}x{}",
                a.nrows(),
                a.ncols(),
                meta.m,
                meta.n
            )));
        }
        if b.len() != meta.m || x_star.len() != meta.n {
            return Err(Error::usage("b or xstar length disagrees with A"));
        }
        Ok(ProblemInstance {
            a,
            b,
            x_star,
            consistent: meta.consistent,
            seed: meta.seed,
            meta,
        })
    }
}

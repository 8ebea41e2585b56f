//! Convergence factors, flop predictions and per-step bound certification.
//!
//! Deterministic methods (RGDR, RGDC) are certified step by step against
//!
//! ```text
//! 1 − τ_k · (Σ_{i∈U_k} ‖αᵢ‖² / ‖A‖_F²) · σ_min²(A) / σ_max²(A_{U_k,:})
//! τ_k = θ‖A‖_F²/ε_k + (1−θ),   ε_k = ‖A‖_F² − Σ_{i∈Π_k} ‖αᵢ‖²
//! ```
//!
//! (columns: `V_k`, `Ω_k`, `A_{:,V_k}` and the error `‖A(x − x*)‖²`).
//! Randomized methods only have a bound in expectation, `1 − τ·σ_min²/‖A‖_F²`
//! with the global `ε = ‖A‖_F² − min ‖αᵢ‖²`, and are checked over many runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, DenseMatrix, SVD_MAX_DIM};
use crate::selection::{IndexSet, LossKind, LossProfile};
use crate::solve::{Method, SolveReport};

/// Absolute slack added to every theoretical factor.
pub const BOUND_SLACK: f64 = 1e-8;
/// Largest `m·n` accepted by [`certify_run`].
pub const CERTIFY_MAX_ENTRIES: usize = 200_000;
pub const MIN_STATISTICAL_RUNS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    /// `τ_k` / `γ_k` (or the global `τ` / `γ`).
    pub tau: f64,
    /// `ε_k` / `ε̃_k` (or the global `ε`).
    pub epsilon: f64,
    /// `Σ_{Π_k} ‖αᵢ‖²` or `Σ_{Ω_k} ‖βⱼ‖²`.
    pub zero_set_mass: f64,
    pub sigma_min_a: f64,
    pub sigma_max_sub: f64,
    /// Selected energy over `‖A‖_F²`.
    pub set_energy_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub k: usize,
    pub factor_theoretical: f64,
    pub ratio_measured: f64,
    pub satisfied: bool,
    pub components: BoundComponents,
}

/// Rejects matrices too large for the dense SVD.
pub fn check_size(a: &DenseMatrix) -> Result<()> {
    let (m, n) = (a.nrows(), a.ncols());
    if m.min(n) > SVD_MAX_DIM || m.saturating_mul(n) > CERTIFY_MAX_ENTRIES {
        return Err(Error::SizeGuard(format!(
            "{m}x{n} exceeds the bound-verification limit ({CERTIFY_MAX_ENTRIES} entries, min dimension {SVD_MAX_DIM}); skip certification"
        )));
    }
    Ok(())
}

/// Smallest nonzero singular value of `a`.
pub fn sigma_min(a: &DenseMatrix) -> Result<f64> {
    singular_values(a)?
        .last()
        .copied()
        .ok_or_else(|| Error::usage("matrix has no nonzero singular value"))
}

fn sigma_max(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::usage(format!("relaxation parameter must lie in [0, 1], got {theta}")))
    }
}

/// Per-step factor of RGDR (`LossKind::Row`) or RGDC (`LossKind::Column`)
/// given `σ_min(A)`.
pub fn step_factor(
    a: &DenseMatrix,
    kind: LossKind,
    set: &IndexSet,
    zero_set: &[usize],
    theta: f64,
    sigma_min_a: f64,
) -> Result<(f64, BoundComponents)> {
    check_theta(theta)?;
    if set.is_empty() {
        return Err(Error::usage("bound needs a non-empty index set"));
    }
    let (norms, count) = match kind {
        LossKind::Row => (a.row_sqnorms(), a.nrows()),
        LossKind::Column => (a.col_sqnorms(), a.ncols()),
    };
    if set.max_index().is_some_and(|i| i >= count) || zero_set.iter().any(|&i| i >= count) {
        return Err(Error::usage("index out of range in bound evaluation"));
    }
    let frob = a.frob_sq();
    let zero_set_mass: f64 = zero_set.iter().map(|&i| norms[i]).sum();
    let epsilon = frob - zero_set_mass;
    let tau = theta * frob / epsilon + (1.0 - theta);
    let energy: f64 = set.iter().map(|i| norms[i]).sum();
    let sub = match kind {
        LossKind::Row => a.select_rows(set.as_slice())?,
        LossKind::Column => a.select_cols(set.as_slice())?,
    };
    let sigma_max_sub = sigma_max(&sub)?;
    let set_energy_fraction = energy / frob;
    let factor = 1.0 - tau * set_energy_fraction * (sigma_min_a * sigma_min_a) / (sigma_max_sub * sigma_max_sub);
    Ok((
        factor,
        BoundComponents {
            tau,
            epsilon,
            zero_set_mass,
            sigma_min_a,
            sigma_max_sub,
            set_energy_fraction,
        },
    ))
}

/// RGDR factor at a step with row set `set` and loss profile `profile`.
pub fn rgdr_factor(a: &DenseMatrix, set: &IndexSet, profile: &LossProfile, theta1: f64) -> Result<f64> {
    check_size(a)?;
    let s = sigma_min(a)?;
    Ok(step_factor(a, LossKind::Row, set, &profile.zero_set, theta1, s)?.0)
}

/// RGDC factor at a step with column set `set` and loss profile `profile`.
pub fn rgdc_factor(a: &DenseMatrix, set: &IndexSet, profile: &LossProfile, theta2: f64) -> Result<f64> {
    check_size(a)?;
    let s = sigma_min(a)?;
    Ok(step_factor(a, LossKind::Column, set, &profile.zero_set, theta2, s)?.0)
}

fn global_factor(a: &DenseMatrix, kind: LossKind, theta: f64) -> Result<(f64, BoundComponents)> {
    check_theta(theta)?;
    check_size(a)?;
    let norms = match kind {
        LossKind::Row => a.row_sqnorms(),
        LossKind::Column => a.col_sqnorms(),
    };
    let frob = a.frob_sq();
    let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let epsilon = frob - min_norm;
    let tau = theta * frob / epsilon + (1.0 - theta);
    let s = sigma_min(a)?;
    let factor = 1.0 - tau * s * s / frob;
    Ok((
        factor,
        BoundComponents {
            tau,
            epsilon,
            zero_set_mass: min_norm,
            sigma_min_a: s,
            sigma_max_sub: f64::NAN,
            set_energy_fraction: f64::NAN,
        },
    ))
}

/// Expected contraction factor of RGRK.
pub fn rgrk_factor(a: &DenseMatrix, theta1: f64) -> Result<f64> {
    Ok(global_factor(a, LossKind::Row, theta1)?.0)
}

/// Expected contraction factor of RGRCD (error measured as `‖A(x − x*)‖²`).
pub fn rgrcd_factor(a: &DenseMatrix, theta2: f64) -> Result<f64> {
    Ok(global_factor(a, LossKind::Column, theta2)?.0)
}

/// Flops of one RGDR step with `|U_k| = set_size`: update plus selection.
pub fn flops_rgdr(m: usize, n: usize, set_size: usize) -> u64 {
    let (m, n, s) = (m as u64, n as u64, set_size as u64);
    (2 * s + 1) * (m + n) + s * (3 * s + 7) / 2 + 4 * m + 2
}

/// Flops of one RGDC step with `|V_k| = set_size`: update plus selection.
pub fn flops_rgdc(n: usize, set_size: usize) -> u64 {
    let (n, s) = (n as u64, set_size as u64);
    (2 * s + 1) * n + s * (3 * s + 11) / 2 + 4 * n + 2
}

/// One certificate per recorded step of `report`.
///
/// RGDR/RGDC steps get their own factor; RGRK/RGRCD steps carry the global
/// expected factor, whose per-step `satisfied` flag is informative only (see
/// [`certify_randomized`]).
pub fn certify_run(report: &SolveReport, a: &DenseMatrix) -> Result<Vec<BoundCertificate>> {
    let steps = report
        .steps
        .as_ref()
        .ok_or_else(|| Error::usage("report has no step trace; rerun with step recording"))?;
    check_size(a)?;
    let cfg = &report.selection;
    let certs = match report.method {
        Method::Rgdr | Method::Rgdc => {
            let (kind, theta) = match report.method {
                Method::Rgdr => (LossKind::Row, cfg.theta1),
                _ => (LossKind::Column, cfg.theta2),
            };
            let s = sigma_min(a)?;
            steps
                .iter()
                .map(|st| {
                    let (factor, components) = step_factor(a, kind, &st.set, &st.zero_set, theta, s)?;
                    Ok(certificate(st.k, factor, ratio(st.err_sq_before, st.err_sq_after), components))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Method::Rgrk | Method::Rgrcd => {
            let (factor, components) = match report.method {
                Method::Rgrk => global_factor(a, LossKind::Row, cfg.theta1)?,
                _ => global_factor(a, LossKind::Column, cfg.theta2)?,
            };
            steps
                .iter()
                .map(|st| certificate(st.k, factor, ratio(st.err_sq_before, st.err_sq_after), components))
                .collect()
        }
        m => return Err(Error::usage(format!("no convergence bound is available for {m}"))),
    };
    Ok(certs)
}

fn ratio(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        0.0
    } else {
        after / before
    }
}

fn certificate(k: usize, factor: f64, ratio_measured: f64, components: BoundComponents) -> BoundCertificate {
    BoundCertificate {
        k,
        factor_theoretical: factor,
        ratio_measured,
        satisfied: ratio_measured <= factor + BOUND_SLACK,
        components,
    }
}

/// Aggregate check of an expectation bound over repeated runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticalCheck {
    pub runs: usize,
    /// Mean over runs of the per-run geometric-mean step ratio.
    pub mean_ratio: f64,
    pub std_error: f64,
    pub factor: f64,
    /// `mean_ratio <= factor + 3·std_error`.
    pub satisfied: bool,
}

/// Checks RGRK/RGRCD runs against their expected factor.
///
/// Each run contributes `(e_K / e_0)^{1/K}`, the geometric mean of its step
/// ratios; by Jensen its expectation is at most the expected factor.
pub fn certify_randomized(reports: &[SolveReport], a: &DenseMatrix) -> Result<StatisticalCheck> {
    if reports.len() < MIN_STATISTICAL_RUNS {
        return Err(Error::usage(format!(
            "statistical certification needs at least {MIN_STATISTICAL_RUNS} runs, got {}",
            reports.len()
        )));
    }
    let method = reports[0].method;
    let theta = match method {
        Method::Rgrk => reports[0].selection.theta1,
        Method::Rgrcd => reports[0].selection.theta2,
        m => return Err(Error::usage(format!("{m} has no expectation bound"))),
    };
    if reports.iter().any(|r| r.method != method || r.theta != reports[0].theta) {
        return Err(Error::usage("reports mix methods or parameters"));
    }
    let factor = match method {
        Method::Rgrk => rgrk_factor(a, theta)?,
        _ => rgrcd_factor(a, theta)?,
    };
    let mut samples = Vec::with_capacity(reports.len());
    for rep in reports {
        let steps = rep
            .steps
            .as_ref()
            .ok_or_else(|| Error::usage("report has no step trace"))?;
        let (Some(first), Some(last)) = (steps.first(), steps.last()) else {
            continue;
        };
        let g = ratio(first.err_sq_before, last.err_sq_after).powf(1.0 / steps.len() as f64);
        samples.push(g);
    }
    if samples.len() < 2 {
        return Err(Error::usage("too few runs with at least one step"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    Ok(StatisticalCheck {
        runs: samples.len(),
        mean_ratio: mean,
        std_error,
        factor,
        satisfied: mean <= factor + 3.0 * std_error,
    })
}

#[derive(Serialize)]
struct CertificateRow {
    k: usize,
    factor: f64,
    ratio: f64,
    satisfied: bool,
    tau: f64,
    epsilon: f64,
    zero_set_mass: f64,
    sigma_min_a: f64,
    sigma_max_sub: f64,
    set_energy_fraction: f64,
}

/// Writes certificates as CSV with a header row.
pub fn write_certificates_csv<W: Write>(w: W, certs: &[BoundCertificate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if certs.is_empty() {
        out.write_record([
            "k",
            "factor",
            "ratio",
            "satisfied",
            "tau",
            "epsilon",
            "zero_set_mass",
            "sigma_min_a",
            "sigma_max_sub",
            "set_energy_fraction",
        ])
        .map_err(csv_err)?;
    }
    for c in certs {
        let p = &c.components;
        out.serialize(CertificateRow {
            k: c.k,
            factor: c.factor_theoretical,
            ratio: c.ratio_measured,
            satisfied: c.satisfied,
            tau: p.tau,
            epsilon: p.epsilon,
            zero_set_mass: p.zero_set_mass,
            sigma_min_a: p.sigma_min_a,
            sigma_max_sub: p.sigma_max_sub,
            set_energy_fraction: p.set_energy_fraction,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::usage(format!("csv: {other:?}")),
    }
}

//! Column-action methods: CD, RGRCD, RGDC, AMDCD and RBCD.
//!
//! These converge to the least-squares solution whether or not `Ax = b` is
//! consistent. Selection reads `y = Aᵀr`, which every step keeps current by
//! recursion (`y −= Aᵀ(A·increment)`, never forming `AᵀA`); `r` is carried
//! along for reporting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cgls::{cgls, CglsConfig};
use crate::error::{Error, Result};
use crate::linalg::vecops::{axpy, norm, norm_sq};
use crate::linalg::{ColBlock, DenseMatrix};
use crate::selection::{
    column_losses_from_gradient, make_partition, max_distance_set, relaxed_greedy_set, sample_by_squares,
    IndexSet,
};
use crate::solve::{
    check_inputs, Method, Recorder, SolveOptions, SolveReport, SolveState, StepOutcome, StepRecord,
    TerminationReason, REFRESH_INTERVAL,
};

fn check_col(a: &DenseMatrix, j: usize) -> Result<f64> {
    if j >= a.ncols() {
        return Err(Error::usage(format!("column index {j} out of range for {} columns", a.ncols())));
    }
    let s = a.col_sqnorms()[j];
    if s == 0.0 {
        return Err(Error::usage(format!("zero column {j} cannot be used")));
    }
    Ok(s)
}

fn check_set(a: &DenseMatrix, set: &IndexSet, what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::usage(format!("{what} needs a non-empty column set")));
    }
    if let Some(j) = set.max_index().filter(|&j| j >= a.ncols()) {
        return Err(Error::usage(format!("column index {j} out of range")));
    }
    Ok(())
}

/// Applies `x += inc` where `c = A·inc` is already known: `r −= c`, `y −= Aᵀc`.
fn apply_image(state: &mut SolveState, a: &DenseMatrix, c: &[f64]) {
    axpy(-1.0, c, &mut state.r);
    let atc = a.matvec_transpose(c).expect("image has m entries");
    let y = state.y.as_mut().expect("column state carries y");
    axpy(-1.0, &atc, y);
}

/// Exact minimization along coordinate `j`.
pub fn cd_step(state: &mut SolveState, a: &DenseMatrix, j: usize) -> Result<StepOutcome> {
    let sq = check_col(a, j)?;
    state.k += 1;
    state.last_set_size = 1;
    let yj = state.gradient()[j];
    if yj == 0.0 {
        return Ok(StepOutcome::unchanged(Some(j)));
    }
    let w = yj / sq;
    state.x[j] += w;
    let c: Vec<f64> = a.col(j).iter().map(|v| w * v).collect();
    apply_image(state, a, &c);
    if let Some(y) = state.y.as_mut() {
        y[j] = 0.0;
    }
    Ok(StepOutcome::moved(1.0 / sq, Some(j)))
}

/// Aggregated step along `ξ = Σ_{j∈V} yⱼ νⱼ`.
///
/// With `h₁ = Σ_{j∈V} yⱼ²`, `c = Aξ`, `h₂ = ‖c‖²`: `x_V += (h₁/h₂) y_V`,
/// `y −= (h₁/h₂) Aᵀc`.
pub fn rgdc_step(state: &mut SolveState, a: &DenseMatrix, set: &IndexSet) -> Result<StepOutcome> {
    check_set(a, set, "rgdc_step")?;
    let y = state.gradient();
    let h1: f64 = set.iter().map(|j| y[j] * y[j]).sum();
    if h1 == 0.0 {
        return Err(Error::usage("gradient vanishes on the selected columns"));
    }
    let xi: Vec<(usize, f64)> = set.iter().map(|j| (j, y[j])).collect();
    let mut c = vec![0.0; a.nrows()];
    for &(j, yj) in &xi {
        axpy(yj, a.col(j), &mut c);
    }
    let h2 = norm_sq(&c);
    if h2 == 0.0 {
        return Err(Error::DegenerateStep { iteration: state.k });
    }
    let h3 = h1 / h2;
    for &(j, yj) in &xi {
        state.x[j] += h3 * yj;
    }
    c.iter_mut().for_each(|ci| *ci *= h3);
    apply_image(state, a, &c);
    state.k += 1;
    state.last_set_size = set.len();
    Ok(StepOutcome::moved(h3, None))
}

/// Samples `j ∈ V` with probability `yⱼ²/Σ_{t∈V} y_t²`, then does a CD step.
pub fn rgrcd_step<R: Rng + ?Sized>(
    state: &mut SolveState,
    a: &DenseMatrix,
    set: &IndexSet,
    rng: &mut R,
) -> Result<StepOutcome> {
    check_set(a, set, "rgrcd_step")?;
    let j = sample_by_squares(state.gradient(), set, rng)
        .ok_or_else(|| Error::usage("gradient vanishes on the selected columns"))?;
    let mut out = cd_step(state, a, j)?;
    state.last_set_size = set.len();
    out.index = Some(j);
    Ok(out)
}

/// Simultaneous per-column CD updates `xⱼ += yⱼ/‖βⱼ‖²` for all `j ∈ J`.
///
/// Applied exactly as stated, without damping; strongly correlated columns
/// in `J` can overshoot.
pub fn amdcd_step(state: &mut SolveState, a: &DenseMatrix, set: &IndexSet) -> Result<StepOutcome> {
    check_set(a, set, "amdcd_step")?;
    for j in set.iter() {
        check_col(a, j)?;
    }
    let inc: Vec<(usize, f64)> = set
        .iter()
        .map(|j| (j, state.gradient()[j] / a.col_sqnorms()[j]))
        .collect();
    let mut c = vec![0.0; a.nrows()];
    for &(j, w) in &inc {
        state.x[j] += w;
        axpy(w, a.col(j), &mut c);
    }
    apply_image(state, a, &c);
    state.k += 1;
    state.last_set_size = set.len();
    Ok(StepOutcome::moved(1.0, None))
}

/// Block coordinate step `x_τ += A_{:,τ}† r` with CGLS.
pub fn rbcd_block_step(
    state: &mut SolveState,
    a: &DenseMatrix,
    set: &IndexSet,
    cfg: &CglsConfig,
) -> Result<StepOutcome> {
    check_set(a, set, "rbcd_block_step")?;
    let block = ColBlock {
        matrix: a,
        cols: set.as_slice(),
    };
    let w = cgls(&block, &state.r, cfg)?;
    let mut c = vec![0.0; a.nrows()];
    for (&j, &wj) in set.as_slice().iter().zip(&w) {
        state.x[j] += wj;
        axpy(wj, a.col(j), &mut c);
    }
    apply_image(state, a, &c);
    state.k += 1;
    state.last_set_size = set.len();
    Ok(StepOutcome::moved(1.0, None))
}

/// Runs a column-action method until the stop rule fires.
pub fn run_col_method(
    method: Method,
    a: &DenseMatrix,
    b: &[f64],
    x_star: &[f64],
    opts: &SolveOptions,
    seed: u64,
) -> Result<SolveReport> {
    if method.is_row() {
        return Err(Error::usage(format!("{method} is not a column method")));
    }
    let x0 = check_inputs(a, b, x_star, opts)?;
    let cfg = &opts.selection;
    let stop = &opts.stop;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut state = SolveState::for_cols(a, b, x0)?;
    let partition = match method {
        Method::Rbcd => make_partition(a.ncols(), cfg.block_size)?,
        _ => Vec::new(),
    };
    let stationary_level = stop.stationarity_tol * norm(&a.matvec_transpose(b)?);
    let mut rec = Recorder::new(&state.x, x_star, b, opts.record_steps);
    let ax_star = if opts.record_steps { a.matvec(x_star)? } else { Vec::new() };

    let reason = loop {
        let e = rec.observe(&state.x, x_star);
        if e < stop.rse_tol {
            break TerminationReason::Converged;
        }
        if norm(state.gradient()) <= stationary_level {
            break TerminationReason::Stationary;
        }
        if state.k >= stop.max_iters {
            break TerminationReason::MaxIters;
        }

        let (set, zero_set) = match method {
            Method::Cd => (IndexSet::singleton(state.k % a.ncols()), Vec::new()),
            Method::Rbcd => (partition[rng.random_range(0..partition.len())].clone(), Vec::new()),
            Method::Amdcd => match max_distance_set(a, state.gradient(), cfg.eta2)? {
                Some(s) => (s, Vec::new()),
                None => break TerminationReason::Stationary,
            },
            _ => {
                let profile = column_losses_from_gradient(a, state.gradient(), cfg.zero_rtol)?;
                match relaxed_greedy_set(&profile, cfg.theta2)? {
                    Some(s) => (s, profile.zero_set),
                    None => break TerminationReason::Stationary,
                }
            }
        };

        let err_before = rec.steps.is_some().then(|| image_err_sq(a, &state.x, &ax_star));
        let k = state.k;
        let outcome = match method {
            Method::Cd => cd_step(&mut state, a, set.as_slice()[0])?,
            Method::Rgrcd => rgrcd_step(&mut state, a, &set, &mut rng)?,
            Method::Rgdc => rgdc_step(&mut state, a, &set)?,
            Method::Amdcd => amdcd_step(&mut state, a, &set)?,
            Method::Rbcd => rbcd_block_step(&mut state, a, &set, &opts.cgls)?,
            _ => unreachable!("row method in column driver"),
        };
        rec.set_size_trace.push(set.len());

        if state.k % REFRESH_INTERVAL == 0 {
            let drift = state.refresh(a, b);
            rec.note_drift(drift);
        }
        if let (Some(steps), Some(before)) = (rec.steps.as_mut(), err_before) {
            steps.push(StepRecord {
                k,
                set,
                chosen: outcome.index,
                zero_set,
                err_sq_before: before,
                err_sq_after: image_err_sq(a, &state.x, &ax_star),
            });
        }
    };

    let drift = state.refresh(a, b);
    rec.note_drift(drift);
    let iterations = state.k;
    Ok(rec.finish(method, cfg, seed, iterations, reason, state.x))
}

/// `‖A x − A x*‖²`.
fn image_err_sq(a: &DenseMatrix, x: &[f64], ax_star: &[f64]) -> f64 {
    let ax = a.matvec(x).expect("x has n entries");
    ax.iter().zip(ax_star).map(|(p, q)| (p - q) * (p - q)).sum()
}

//! Row-action methods: Kaczmarz, RGRK, RGDR, GBK and RBK.
//!
//! All steps keep `state.r = b − A·state.x` current. The single-row and
//! aggregated-row updates use the residual recursion and never form `AAᵀ`;
//! block projections recompute the residual from scratch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cgls::{cgls, CglsConfig};
use crate::error::{Error, Result};
use crate::linalg::vecops::{axpy, dot, norm_sq};
use crate::linalg::{DenseMatrix, RowBlock};
use crate::selection::{
    gbk_set, make_partition, relaxed_greedy_set, row_losses_with, sample_by_squares, IndexSet,
};
use crate::solve::{
    check_inputs, Method, Recorder, SolveOptions, SolveReport, SolveState, StepOutcome, StepRecord,
    TerminationReason, REFRESH_INTERVAL,
};

fn check_row(a: &DenseMatrix, i: usize) -> Result<f64> {
    if i >= a.nrows() {
        return Err(Error::usage(format!("row index {i} out of range for {} rows", a.nrows())));
    }
    let s = a.row_sqnorms()[i];
    if s == 0.0 {
        return Err(Error::usage(format!("zero row {i} cannot be projected onto")));
    }
    Ok(s)
}

/// Projects `x` onto the hyperplane of row `i`.
pub fn kaczmarz_step(state: &mut SolveState, a: &DenseMatrix, i: usize) -> Result<StepOutcome> {
    let sq = check_row(a, i)?;
    state.k += 1;
    state.last_set_size = 1;
    let ri = state.r[i];
    if ri == 0.0 {
        return Ok(StepOutcome::unchanged(Some(i)));
    }
    let w = ri / sq;
    let row = a.row(i);
    axpy(w, row, &mut state.x);
    // r −= w·A αᵢ
    for (l, rl) in state.r.iter_mut().enumerate() {
        *rl -= w * dot(a.row(l), row);
    }
    state.r[i] = 0.0;
    Ok(StepOutcome::moved(1.0 / sq, Some(i)))
}

/// Aggregated projection along `d = Aᵀη`, `η = Σ_{i∈U} rᵢ μᵢ`.
///
/// With `g₁ = Σ_{i∈U} rᵢ²` and `g₂ = ‖d‖²`: `x += (g₁/g₂) d`, `r −= (g₁/g₂) A d`.
/// Fails with [`Error::Stalled`] when `d = 0`, i.e. `r|_U` is orthogonal to
/// range(A) and the system is inconsistent.
pub fn rgdr_step(state: &mut SolveState, a: &DenseMatrix, set: &IndexSet) -> Result<StepOutcome> {
    if set.is_empty() {
        return Err(Error::usage("rgdr_step needs a non-empty row set"));
    }
    if let Some(i) = set.max_index().filter(|&i| i >= a.nrows()) {
        return Err(Error::usage(format!("row index {i} out of range")));
    }
    let g1: f64 = set.iter().map(|i| state.r[i] * state.r[i]).sum();
    if g1 == 0.0 {
        return Err(Error::usage("residual vanishes on the selected rows"));
    }
    let mut d = vec![0.0; a.ncols()];
    for i in set.iter() {
        axpy(state.r[i], a.row(i), &mut d);
    }
    let g2 = norm_sq(&d);
    if g2 == 0.0 {
        return Err(Error::Stalled { iteration: state.k });
    }
    let g3 = g1 / g2;
    axpy(g3, &d, &mut state.x);
    let ad = a.matvec(&d)?;
    axpy(-g3, &ad, &mut state.r);
    state.k += 1;
    state.last_set_size = set.len();
    Ok(StepOutcome::moved(g3, None))
}

/// Samples `i ∈ U` with probability `rᵢ²/Σ_{s∈U} r_s²`, then does a Kaczmarz step.
pub fn rgrk_step<R: Rng + ?Sized>(
    state: &mut SolveState,
    a: &DenseMatrix,
    set: &IndexSet,
    rng: &mut R,
) -> Result<StepOutcome> {
    if set.is_empty() {
        return Err(Error::usage("rgrk_step needs a non-empty row set"));
    }
    if let Some(i) = set.max_index().filter(|&i| i >= a.nrows()) {
        return Err(Error::usage(format!("row index {i} out of range")));
    }
    let i = sample_by_squares(&state.r, set, rng)
        .ok_or_else(|| Error::usage("residual vanishes on the selected rows"))?;
    let mut out = kaczmarz_step(state, a, i)?;
    state.last_set_size = set.len();
    out.index = Some(i);
    Ok(out)
}

/// Orthogonal projection onto `{x : A_{I,:} x = b_I}` via CGLS; `r` is recomputed.
pub fn block_project_step(
    state: &mut SolveState,
    a: &DenseMatrix,
    b: &[f64],
    set: &IndexSet,
    cfg: &CglsConfig,
) -> Result<StepOutcome> {
    if set.is_empty() {
        return Err(Error::usage("block projection needs a non-empty row set"));
    }
    if let Some(i) = set.max_index().filter(|&i| i >= a.nrows()) {
        return Err(Error::usage(format!("row index {i} out of range")));
    }
    let rhs: Vec<f64> = set.iter().map(|i| b[i] - dot(a.row(i), &state.x)).collect();
    let block = RowBlock {
        matrix: a,
        rows: set.as_slice(),
    };
    let w = cgls(&block, &rhs, cfg)?;
    axpy(1.0, &w, &mut state.x);
    state.r = a.residual(b, &state.x)?;
    state.k += 1;
    state.last_set_size = set.len();
    Ok(StepOutcome::moved(1.0, None))
}

enum Selection {
    Step(IndexSet, Vec<usize>),
    Done,
}

/// Runs a row-action method until the stop rule fires.
///
/// Inconsistent systems end with [`TerminationReason::Stalled`], either from
/// a degenerate RGDR step or from an RSE plateau.
pub fn run_row_method(
    method: Method,
    a: &DenseMatrix,
    b: &[f64],
    x_star: &[f64],
    opts: &SolveOptions,
    seed: u64,
) -> Result<SolveReport> {
    if !method.is_row() {
        return Err(Error::usage(format!("{method} is not a row method")));
    }
    let x0 = check_inputs(a, b, x_star, opts)?;
    let cfg = &opts.selection;
    let stop = &opts.stop;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut state = SolveState::for_rows(a, b, x0)?;
    let partition = match method {
        Method::Rbk => make_partition(a.nrows(), cfg.block_size)?,
        _ => Vec::new(),
    };
    let stall_window = opts.stall_window_factor.saturating_mul(a.nrows()).max(1);
    let mut rec = Recorder::new(&state.x, x_star, b, opts.record_steps);
    let mut best = f64::INFINITY;
    let mut best_k = 0;

    let reason = loop {
        let e = rec.observe(&state.x, x_star);
        if e < stop.rse_tol {
            break TerminationReason::Converged;
        }
        if e < best * (1.0 - 1e-3) {
            best = e;
            best_k = state.k;
        } else if state.k - best_k >= stall_window {
            break TerminationReason::Stalled;
        }
        if state.k >= stop.max_iters {
            break TerminationReason::MaxIters;
        }

        let selection = match method {
            Method::Kaczmarz => Selection::Step(IndexSet::singleton(state.k % a.nrows()), Vec::new()),
            Method::Rbk => {
                let pick = rng.random_range(0..partition.len());
                Selection::Step(partition[pick].clone(), Vec::new())
            }
            _ => {
                let profile = row_losses_with(a, &state.r, cfg.zero_rtol)?;
                let set = match method {
                    Method::Gbk => gbk_set(&profile, cfg.eta1)?,
                    _ => relaxed_greedy_set(&profile, cfg.theta1)?,
                };
                match set {
                    Some(s) => Selection::Step(s, profile.zero_set),
                    None => Selection::Done,
                }
            }
        };
        let (set, zero_set) = match selection {
            Selection::Step(s, z) => (s, z),
            Selection::Done => break TerminationReason::Stationary,
        };

        let err_before = rec.steps.is_some().then(|| sq_dist(&state.x, x_star));
        let k = state.k;
        let outcome = match method {
            Method::Kaczmarz => kaczmarz_step(&mut state, a, set.as_slice()[0]),
            Method::Rgrk => rgrk_step(&mut state, a, &set, &mut rng),
            Method::Rgdr => rgdr_step(&mut state, a, &set),
            Method::Gbk | Method::Rbk => block_project_step(&mut state, a, b, &set, &opts.cgls),
            _ => unreachable!("column method in row driver"),
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(Error::Stalled { .. }) => break TerminationReason::Stalled,
            Err(e) => return Err(e),
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
                err_sq_after: sq_dist(&state.x, x_star),
            });
        }
    };

    let drift = state.refresh(a, b);
    rec.note_drift(drift);
    let iterations = state.k;
    Ok(rec.finish(method, cfg, seed, iterations, reason, state.x))
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

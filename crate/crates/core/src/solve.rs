//! Iteration state, stopping rule, reports and the method catalog.
//!
//! The drivers themselves live next to their steps in [`crate::rows`] and
//! [`crate::cols`]; [`run_method`] dispatches on [`Method`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cgls::CglsConfig;
use crate::error::{Error, Result};
use crate::linalg::vecops::{dist, norm};
use crate::linalg::DenseMatrix;
use crate::selection::{IndexSet, SelectionConfig};
use crate::{cols, rows};

/// Iterations between full recomputations of `r` (and `y`).
pub const REFRESH_INTERVAL: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kaczmarz,
    Rgrk,
    Rgdr,
    Gbk,
    Rbk,
    Cd,
    Rgrcd,
    Rgdc,
    Amdcd,
    Rbcd,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Kaczmarz,
        Method::Rgrk,
        Method::Rgdr,
        Method::Gbk,
        Method::Rbk,
        Method::Cd,
        Method::Rgrcd,
        Method::Rgdc,
        Method::Amdcd,
        Method::Rbcd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kaczmarz => "kaczmarz",
            Method::Rgrk => "rgrk",
            Method::Rgdr => "rgdr",
            Method::Gbk => "gbk",
            Method::Rbk => "rbk",
            Method::Cd => "cd",
            Method::Rgrcd => "rgrcd",
            Method::Rgdc => "rgdc",
            Method::Amdcd => "amdcd",
            Method::Rbcd => "rbcd",
        }
    }

    pub fn is_row(self) -> bool {
        matches!(
            self,
            Method::Kaczmarz | Method::Rgrk | Method::Rgdr | Method::Gbk | Method::Rbk
        )
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Method::Rgrk | Method::Rbk | Method::Rgrcd | Method::Rbcd)
    }

    /// The relaxation parameter this method reads, if any.
    pub fn theta(self, cfg: &SelectionConfig) -> Option<f64> {
        match self {
            Method::Rgrk | Method::Rgdr => Some(cfg.theta1),
            Method::Rgrcd | Method::Rgdc => Some(cfg.theta2),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::usage(format!("unknown method '{s}' (known: {})", known.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub rse_tol: f64,
    pub max_iters: usize,
    /// Column methods stop once `‖Aᵀr‖ <= stationarity_tol · ‖Aᵀb‖`.
    pub stationarity_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            rse_tol: 1e-4,
            max_iters: 1_000_000,
            stationarity_tol: 1e-14,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.rse_tol > 0.0) || self.max_iters == 0 || !(self.stationarity_tol > 0.0) {
            return Err(Error::usage("stop rule tolerances and iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIters,
    Stalled,
    Stationary,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxIters => "max_iters",
            TerminationReason::Stalled => "stalled",
            TerminationReason::Stationary => "stationary",
        })
    }
}

/// Evolving iterate with its residual `r = b − Ax` and, for column
/// methods, `y = Aᵀr`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveState {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub k: usize,
    pub last_set_size: usize,
}

impl SolveState {
    /// Row-method state at `x0`.
    pub fn for_rows(a: &DenseMatrix, b: &[f64], x0: Vec<f64>) -> Result<Self> {
        let r = a.residual(b, &x0)?;
        Ok(SolveState {
            x: x0,
            r,
            y: None,
            k: 0,
            last_set_size: 0,
        })
    }

    /// Column-method state at `x0` (maintains `y`).
    pub fn for_cols(a: &DenseMatrix, b: &[f64], x0: Vec<f64>) -> Result<Self> {
        let mut s = Self::for_rows(a, b, x0)?;
        s.y = Some(a.matvec_transpose(&s.r)?);
        Ok(s)
    }

    pub fn gradient(&self) -> &[f64] {
        self.y.as_deref().expect("column state carries y = Aᵀr")
    }

    /// Replaces the recursively updated `r` (and `y`) by fresh products and
    /// returns the drift `‖r_rec − r_fresh‖`.
    pub fn refresh(&mut self, a: &DenseMatrix, b: &[f64]) -> f64 {
        let mut fresh = vec![0.0; a.nrows()];
        a.matvec_into(&self.x, &mut fresh);
        for (f, bi) in fresh.iter_mut().zip(b) {
            *f = bi - *f;
        }
        let drift = dist(&fresh, &self.r);
        self.r = fresh;
        if let Some(y) = self.y.as_mut() {
            a.matvec_transpose_into(&self.r, y);
        }
        drift
    }
}

/// Result of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// `g₃ = g₁/g₂` (rows), `h₃ = h₁/h₂` (columns), `1/‖·‖²` for single
    /// index steps, `1` for block projections; `0` if nothing moved.
    pub projection_weight: f64,
    /// Index actually used by single-index steps.
    pub index: Option<usize>,
    pub converged: bool,
}

impl StepOutcome {
    pub(crate) fn moved(weight: f64, index: Option<usize>) -> Self {
        StepOutcome {
            projection_weight: weight,
            index,
            converged: false,
        }
    }

    pub(crate) fn unchanged(index: Option<usize>) -> Self {
        StepOutcome {
            projection_weight: 0.0,
            index,
            converged: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub selection: SelectionConfig,
    pub stop: StopRule,
    pub cgls: CglsConfig,
    /// Initial guess; zero when absent.
    pub x0: Option<Vec<f64>>,
    /// Keep per-step sets and error norms for bound certification.
    pub record_steps: bool,
    /// Row methods give up after `stall_window_factor · m` iterations
    /// without a 0.1 % improvement of the best RSE.
    pub stall_window_factor: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            selection: SelectionConfig::default(),
            stop: StopRule::default(),
            cgls: CglsConfig::default(),
            x0: None,
            record_steps: false,
            stall_window_factor: 10,
        }
    }
}

/// Per-step detail kept when [`SolveOptions::record_steps`] is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Selected set (`U_k`, `V_k`, `I_k`, `J_k` or the partition block).
    pub set: IndexSet,
    /// Index used by single-index methods.
    pub chosen: Option<usize>,
    /// Indices with numerically zero loss at `x⁽ᵏ⁾` (`Π_k` / `Ω_k`).
    pub zero_set: Vec<usize>,
    /// `‖x⁽ᵏ⁾ − x*‖²` (rows) or `‖A(x⁽ᵏ⁾ − x*)‖²` (columns).
    pub err_sq_before: f64,
    pub err_sq_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub theta: Option<f64>,
    pub selection: SelectionConfig,
    pub seed: u64,
    /// IT.
    pub iterations: usize,
    pub final_rse: f64,
    /// RSE at `k = 0, …, IT`.
    pub rse_trace: Vec<f64>,
    /// Selected-set size of each step.
    pub set_size_trace: Vec<usize>,
    /// Cumulative solver seconds at `k = 0, …, IT`.
    pub time_trace: Vec<f64>,
    pub wall_seconds: f64,
    pub termination_reason: TerminationReason,
    /// Largest `‖r_rec − r_fresh‖ / ‖b‖` seen at refresh points.
    pub max_residual_drift: f64,
    pub x: Vec<f64>,
    pub steps: Option<Vec<StepRecord>>,
}

/// Relative solution error `‖x − x*‖ / ‖x⁰ − x*‖`; zero when `x⁰ = x*`.
pub fn rse(x: &[f64], x_star: &[f64], initial_error: f64) -> f64 {
    if initial_error == 0.0 {
        0.0
    } else {
        dist(x, x_star) / initial_error
    }
}

pub(crate) fn check_inputs(a: &DenseMatrix, b: &[f64], x_star: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    opts.selection.validate()?;
    opts.stop.validate()?;
    if b.len() != a.nrows() {
        return Err(Error::usage(format!("b has length {}, A has {} rows", b.len(), a.nrows())));
    }
    if x_star.len() != a.ncols() {
        return Err(Error::usage(format!(
            "x* has length {}, A has {} columns",
            x_star.len(),
            a.ncols()
        )));
    }
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![0.0; a.ncols()]);
    if x0.len() != a.ncols() {
        return Err(Error::usage("x0 length does not match column count"));
    }
    Ok(x0)
}

/// Runs `method` on `Ax = b`, measuring RSE against `x_star`.
pub fn run_method(
    method: Method,
    a: &DenseMatrix,
    b: &[f64],
    x_star: &[f64],
    opts: &SolveOptions,
    seed: u64,
) -> Result<SolveReport> {
    if method.is_row() {
        rows::run_row_method(method, a, b, x_star, opts, seed)
    } else {
        cols::run_col_method(method, a, b, x_star, opts, seed)
    }
}

/// Bookkeeping shared by the row and column drivers.
pub(crate) struct Recorder {
    pub initial_error: f64,
    pub b_norm: f64,
    pub rse_trace: Vec<f64>,
    pub set_size_trace: Vec<usize>,
    pub time_trace: Vec<f64>,
    pub steps: Option<Vec<StepRecord>>,
    pub max_drift: f64,
    start: std::time::Instant,
}

impl Recorder {
    pub fn new(x0: &[f64], x_star: &[f64], b: &[f64], record_steps: bool) -> Self {
        Recorder {
            initial_error: dist(x0, x_star),
            b_norm: norm(b),
            rse_trace: Vec::new(),
            set_size_trace: Vec::new(),
            time_trace: Vec::new(),
            steps: record_steps.then(Vec::new),
            max_drift: 0.0,
            start: std::time::Instant::now(),
        }
    }

    /// Records RSE and elapsed time for the current iterate and returns the RSE.
    pub fn observe(&mut self, x: &[f64], x_star: &[f64]) -> f64 {
        let e = rse(x, x_star, self.initial_error);
        self.rse_trace.push(e);
        self.time_trace.push(self.start.elapsed().as_secs_f64());
        e
    }

    pub fn note_drift(&mut self, drift: f64) {
        let rel = if self.b_norm > 0.0 { drift / self.b_norm } else { drift };
        self.max_drift = self.max_drift.max(rel);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        self,
        method: Method,
        selection: &SelectionConfig,
        seed: u64,
        iterations: usize,
        reason: TerminationReason,
        x: Vec<f64>,
    ) -> SolveReport {
        let wall_seconds = self.start.elapsed().as_secs_f64();
        SolveReport {
            method,
            theta: method.theta(selection),
            selection: *selection,
            seed,
            iterations,
            final_rse: self.rse_trace.last().copied().unwrap_or(f64::NAN),
            rse_trace: self.rse_trace,
            set_size_trace: self.set_size_trace,
            time_trace: self.time_trace,
            wall_seconds,
            termination_reason: reason,
            max_residual_drift: self.max_drift,
            x,
            steps: self.steps,
        }
    }
}

//! Per-index losses and the index-selection rules built on them.
//!
//! Row loss `ψᵢ = rᵢ²/‖αᵢ‖²`, column loss `φⱼ = (βⱼᵀr)²/‖βⱼ‖²`. The relaxed
//! greedy rule keeps every index whose loss reaches
//! `θ·max + (1−θ)·Σ weightᵢ·lossᵢ`, with energy weights `‖αᵢ‖²/‖A‖_F²`
//! (rows) or `‖βⱼ‖²/‖A‖_F²` (columns).
//!
//! Selection rules return `None` when the maximum loss is exactly zero:
//! the iterate is converged (rows) or stationary (columns) and the caller
//! must stop instead of selecting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Relative zero threshold for `Π_k` / `Ω_k` membership.
pub const ZERO_LOSS_RTOL: f64 = 1e-14;
/// Absolute floor of the zero threshold.
pub const ZERO_LOSS_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Row,
    Column,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossProfile {
    pub kind: LossKind,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub max_loss: f64,
    pub weighted_mean: f64,
    /// Indices whose loss is numerically zero.
    pub zero_set: Vec<usize>,
}

impl LossProfile {
    fn build(kind: LossKind, losses: Vec<f64>, sqnorms: &[f64], frob_sq: f64, zero_rtol: f64) -> Self {
        let weights: Vec<f64> = sqnorms.iter().map(|s| s / frob_sq).collect();
        let max_loss = losses.iter().copied().fold(0.0_f64, f64::max);
        let weighted_mean = losses.iter().zip(&weights).map(|(l, w)| l * w).sum();
        let zero_tol = (zero_rtol * max_loss).max(ZERO_LOSS_FLOOR);
        let zero_set = losses
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < zero_tol)
            .map(|(i, _)| i)
            .collect();
        LossProfile {
            kind,
            losses,
            weights,
            max_loss,
            weighted_mean,
            zero_set,
        }
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Every index attaining `max_loss`.
    pub fn argmax_set(&self) -> IndexSet {
        IndexSet(
            self.losses
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == self.max_loss)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

/// Parameters of every selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Row relaxation, in `[0, 1]`.
    pub theta1: f64,
    /// Column relaxation, in `[0, 1]`.
    pub theta2: f64,
    /// GBK greedy fraction, in `(0, 1]`.
    pub eta1: f64,
    /// AMDCD distance slack, `>= 0`.
    pub eta2: f64,
    /// Partition block size for RBK / RBCD.
    pub block_size: usize,
    pub zero_rtol: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            theta1: 0.5,
            theta2: 0.5,
            eta1: 0.5,
            eta2: 0.1,
            block_size: 100,
            zero_rtol: ZERO_LOSS_RTOL,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta1)?;
        check_theta(self.theta2)?;
        if !(self.eta1 > 0.0 && self.eta1 <= 1.0) {
            return Err(Error::usage(format!("eta1 must lie in (0, 1], got {}", self.eta1)));
        }
        if !(self.eta2 >= 0.0 && self.eta2.is_finite()) {
            return Err(Error::usage(format!("eta2 must be finite and >= 0, got {}", self.eta2)));
        }
        if self.block_size == 0 {
            return Err(Error::usage("block size must be positive"));
        }
        if !(self.zero_rtol >= 0.0 && self.zero_rtol < 1.0) {
            return Err(Error::usage("zero_rtol must lie in [0, 1)"));
        }
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::usage(format!("relaxation parameter must lie in [0, 1], got {theta}")))
    }
}

/// Sorted, duplicate-free list of row or column indices (zero-based).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(vec![i])
    }

    pub fn range(start: usize, end: usize) -> Self {
        IndexSet((start..end).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

pub fn row_losses(a: &DenseMatrix, r: &[f64]) -> Result<LossProfile> {
    row_losses_with(a, r, ZERO_LOSS_RTOL)
}

pub fn row_losses_with(a: &DenseMatrix, r: &[f64], zero_rtol: f64) -> Result<LossProfile> {
    if r.len() != a.nrows() {
        return Err(Error::usage(format!(
            "residual has length {}, matrix has {} rows",
            r.len(),
            a.nrows()
        )));
    }
    if let Some(i) = a.zero_row() {
        return Err(Error::usage(format!("zero row {i} unsupported by greedy selection")));
    }
    let losses = r.iter().zip(a.row_sqnorms()).map(|(ri, s)| ri * ri / s).collect();
    Ok(LossProfile::build(LossKind::Row, losses, a.row_sqnorms(), a.frob_sq(), zero_rtol))
}

/// Column losses from the residual `r = b − Ax`.
pub fn column_losses(a: &DenseMatrix, r: &[f64]) -> Result<LossProfile> {
    let y = a.matvec_transpose(r)?;
    column_losses_from_gradient(a, &y, ZERO_LOSS_RTOL)
}

/// Column losses from a maintained `y = Aᵀr`.
pub fn column_losses_from_gradient(a: &DenseMatrix, y: &[f64], zero_rtol: f64) -> Result<LossProfile> {
    if y.len() != a.ncols() {
        return Err(Error::usage(format!(
            "gradient has length {}, matrix has {} columns",
            y.len(),
            a.ncols()
        )));
    }
    if let Some(j) = a.zero_col() {
        return Err(Error::usage(format!("zero column {j} unsupported by greedy selection")));
    }
    let losses = y.iter().zip(a.col_sqnorms()).map(|(yj, s)| yj * yj / s).collect();
    Ok(LossProfile::build(LossKind::Column, losses, a.col_sqnorms(), a.frob_sq(), zero_rtol))
}

/// Relaxed greedy set `{i : lossᵢ >= θ·max + (1−θ)·weighted_mean}`.
pub fn relaxed_greedy_set(profile: &LossProfile, theta: f64) -> Result<Option<IndexSet>> {
    check_theta(theta)?;
    if profile.max_loss <= 0.0 {
        return Ok(None);
    }
    // The weighted mean can exceed the max by rounding; the argmax must stay selected.
    let threshold = (theta * profile.max_loss + (1.0 - theta) * profile.weighted_mean).min(profile.max_loss);
    Ok(Some(select_at_least(&profile.losses, threshold)))
}

/// Greedy block set `{i : lossᵢ >= η₁·max}`.
pub fn gbk_set(profile: &LossProfile, eta1: f64) -> Result<Option<IndexSet>> {
    if !(eta1 > 0.0 && eta1 <= 1.0) {
        return Err(Error::usage(format!("eta1 must lie in (0, 1], got {eta1}")));
    }
    if profile.max_loss <= 0.0 {
        return Ok(None);
    }
    Ok(Some(select_at_least(&profile.losses, eta1 * profile.max_loss)))
}

fn select_at_least(losses: &[f64], threshold: f64) -> IndexSet {
    IndexSet(
        losses
            .iter()
            .enumerate()
            .filter(|(_, &l)| l >= threshold)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Max-distance set `{j : D_max − Dⱼ <= η₂}` with `Dⱼ = |yⱼ|/‖βⱼ‖`, `y = Aᵀr`.
pub fn max_distance_set(a: &DenseMatrix, y: &[f64], eta2: f64) -> Result<Option<IndexSet>> {
    if !(eta2 >= 0.0 && eta2.is_finite()) {
        return Err(Error::usage(format!("eta2 must be finite and >= 0, got {eta2}")));
    }
    if y.len() != a.ncols() {
        return Err(Error::usage("gradient length does not match column count"));
    }
    if let Some(j) = a.zero_col() {
        return Err(Error::usage(format!("zero column {j} unsupported by greedy selection")));
    }
    let dist: Vec<f64> = y
        .iter()
        .zip(a.col_sqnorms())
        .map(|(yj, s)| yj.abs() / s.sqrt())
        .collect();
    let d_max = dist.iter().copied().fold(0.0_f64, f64::max);
    if d_max <= 0.0 {
        return Ok(None);
    }
    Ok(Some(IndexSet(
        dist.iter()
            .enumerate()
            .filter(|(_, &d)| d_max - d <= eta2)
            .map(|(j, _)| j)
            .collect(),
    )))
}

/// Contiguous blocks of `block_size` indices; the last block holds the remainder.
pub fn make_partition(count: usize, block_size: usize) -> Result<Vec<IndexSet>> {
    if count == 0 || block_size == 0 {
        return Err(Error::usage("partition needs count >= 1 and block_size >= 1"));
    }
    Ok((0..count)
        .step_by(block_size)
        .map(|start| IndexSet::range(start, (start + block_size).min(count)))
        .collect())
}

/// Draws an index from `set` with probability `vᵢ² / Σ_{s∈set} v_s²`.
///
/// Returns `None` when `v` vanishes on `set`.
pub fn sample_by_squares<R: Rng + ?Sized>(v: &[f64], set: &IndexSet, rng: &mut R) -> Option<usize> {
    let total: f64 = set.iter().map(|i| v[i] * v[i]).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for i in set.iter() {
        let w = v[i] * v[i];
        if w == 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return last;
        }
    }
    last
}

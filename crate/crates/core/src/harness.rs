//! Experiment plumbing behind the `rgd` binary: repeated solves, benchmark
//! sweeps, summaries and long-format trace CSV.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{self, ProblemInstance, ProblemKind, ProblemSpec, DEFAULT_NOISE_SCALE};
use crate::selection::SelectionConfig;
use crate::solve::{run_method, Method, SolveOptions, SolveReport, TerminationReason};
use crate::theory::csv_err;

/// Solver seed of repeat `i` for a base seed.
pub fn repeat_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Runs `method` `repeats` times (in parallel) with seeds `base, base+1, …`.
pub fn solve_repeated(
    method: Method,
    inst: &ProblemInstance,
    opts: &SolveOptions,
    base_seed: u64,
    repeats: usize,
) -> Result<Vec<SolveReport>> {
    if repeats == 0 {
        return Err(Error::usage("repeats must be at least 1"));
    }
    (0..repeats)
        .into_par_iter()
        .map(|i| run_method(method, &inst.a, &inst.b, &inst.x_star, opts, repeat_seed(base_seed, i)))
        .collect()
}

/// Arithmetic means over a group of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub theta: Option<f64>,
    pub runs: usize,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
    pub mean_final_rse: f64,
    /// Runs ending in [`TerminationReason::Converged`] or `Stationary`.
    pub converged: usize,
}

impl RunSummary {
    pub fn from_reports(reports: &[SolveReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::usage("no reports to summarize"))?;
        let n = reports.len() as f64;
        Ok(RunSummary {
            method: first.method,
            theta: first.theta,
            runs: reports.len(),
            mean_iterations: reports.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            mean_seconds: reports.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
            mean_final_rse: reports.iter().map(|r| r.final_rse).sum::<f64>() / n,
            converged: reports.iter().filter(|r| is_success(r.termination_reason)).count(),
        })
    }
}

pub fn is_success(reason: TerminationReason) -> bool {
    matches!(reason, TerminationReason::Converged | TerminationReason::Stationary)
}

fn fmt_theta(theta: Option<f64>) -> String {
    theta.map(|t| t.to_string()).unwrap_or_default()
}

/// `method,theta,runs,mean_it,mean_cpu,mean_final_rse,converged`.
pub fn write_summary_csv<W: Write>(w: W, rows: &[RunSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "theta", "runs", "mean_it", "mean_cpu", "mean_final_rse", "converged"])
        .map_err(csv_err)?;
    for s in rows {
        out.write_record([
            s.method.name().to_string(),
            fmt_theta(s.theta),
            s.runs.to_string(),
            format!("{:.1}", s.mean_iterations),
            format!("{:.6}", s.mean_seconds),
            format!("{:e}", s.mean_final_rse),
            s.converged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Long-format RSE traces, one row per iteration, using the first run of
/// each report group. Rows are sorted by method, then theta, then `k`.
pub fn write_trace_csv<W: Write>(w: W, reports: &[&SolveReport]) -> Result<()> {
    let mut rows: Vec<(Method, Option<f64>, usize, f64, f64)> = Vec::new();
    for rep in reports {
        for (k, (&rse, &t)) in rep.rse_trace.iter().zip(&rep.time_trace).enumerate() {
            rows.push((rep.method, rep.theta, k, t, rse));
        }
    }
    rows.sort_by(|a, b| {
        a.0.name()
            .cmp(b.0.name())
            .then(a.1.unwrap_or(-1.0).total_cmp(&b.1.unwrap_or(-1.0)))
            .then(a.2.cmp(&b.2))
    });
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "theta", "k", "cumulative_seconds", "rse"])
        .map_err(csv_err)?;
    for (m, theta, k, t, rse) in rows {
        out.write_record([m.name().to_string(), fmt_theta(theta), k.to_string(), format!("{t:.9}"), format!("{rse:e}")])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a report file written by `solve`: either one report or an array.
pub fn parse_reports(text: &str) -> Result<Vec<SolveReport>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}

/// Problem size entry of a benchmark configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSize {
    #[serde(flatten)]
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
}

fn default_repeats() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-4
}
fn default_max_iters() -> usize {
    1_000_000
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_SCALE
}

/// JSON benchmark configuration.
///
/// ```json
/// {
///   "methods": ["rgdr", "rgrk"],
///   "thetas": [0.3, 0.5, 0.7, 0.9],
///   "sizes": [{"generator": "randn", "m": 1000, "n": 100}],
///   "seeds": [1, 2, 3],
///   "repeats": 1,
///   "tol": 1e-4,
///   "max_iters": 1000000,
///   "inconsistent": false,
///   "noise_scale": 0.1
/// }
/// ```
///
/// `thetas` applies to methods with a relaxation parameter; the others run
/// once per size and seed. Each seed generates one instance; randomized
/// methods run `repeats` times on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    #[serde(default)]
    pub thetas: Vec<f64>,
    pub sizes: Vec<BenchSize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub inconsistent: bool,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    #[serde(default)]
    pub eta1: Option<f64>,
    #[serde(default)]
    pub eta2: Option<f64>,
    #[serde(default)]
    pub block_size: Option<usize>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::usage("bench config lists no methods"));
        }
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::usage("bench config needs at least one size and one seed"));
        }
        if self.repeats == 0 {
            return Err(Error::usage("repeats must be at least 1"));
        }
        if self.methods.iter().any(|m| m.theta(&SelectionConfig::default()).is_some()) && self.thetas.is_empty() {
            return Err(Error::usage("relaxed methods need a non-empty 'thetas' list"));
        }
        for &t in &self.thetas {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::usage(format!("theta {t} outside [0, 1]")));
            }
        }
        for s in &self.sizes {
            problems::InstanceMeta {
                kind: s.kind,
                m: s.m,
                n: s.n,
                seed: 0,
                consistent: true,
                noise_scale: None,
            }
            .validate()?;
            if s.kind == ProblemKind::Custom {
                return Err(Error::usage("bench sizes must name a generator"));
            }
        }
        self.options(None).stop.validate()?;
        self.options(None).selection.validate()?;
        Ok(())
    }

    fn options(&self, theta: Option<f64>) -> SolveOptions {
        let mut opts = SolveOptions::default();
        opts.stop.rse_tol = self.tol;
        opts.stop.max_iters = self.max_iters;
        if let Some(t) = theta {
            opts.selection.theta1 = t;
            opts.selection.theta2 = t;
        }
        if let Some(e) = self.eta1 {
            opts.selection.eta1 = e;
        }
        if let Some(e) = self.eta2 {
            opts.selection.eta2 = e;
        }
        if let Some(b) = self.block_size {
            opts.selection.block_size = b;
        }
        opts
    }

    fn spec(&self, size: &BenchSize, seed: u64) -> ProblemSpec {
        ProblemSpec {
            kind: size.kind,
            m: size.m,
            n: size.n,
            seed,
            inconsistent: self.inconsistent,
            noise_scale: self.noise_scale,
        }
    }
}

/// Parses and validates a benchmark configuration.
pub fn parse_bench_config(text: &str) -> Result<BenchConfig> {
    let cfg: BenchConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// One aggregated row of a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub theta: Option<f64>,
    pub size: BenchSize,
    pub runs: usize,
    pub failures: usize,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
    pub mean_final_rse: f64,
    pub converged: usize,
    /// First error message, if any run failed.
    pub error: Option<String>,
}

/// IT ratio between a baseline method and RGDR/RGDC at the same size and theta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub size: BenchSize,
    pub theta: f64,
    pub baseline: Method,
    pub method: Method,
    /// `mean IT(baseline) / mean IT(method)`.
    pub it_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub trends: Vec<TrendRow>,
}

/// Runs every (method, theta, size, seed) cell; cells run concurrently and
/// rows come out in declaration order. Failed runs are counted, not fatal.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let instances: Vec<Vec<std::result::Result<ProblemInstance, String>>> = cfg
        .sizes
        .par_iter()
        .map(|size| {
            cfg.seeds
                .par_iter()
                .map(|&seed| problems::generate(&cfg.spec(size, seed)).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();

    let mut groups: Vec<(Method, Option<f64>, usize)> = Vec::new();
    for (si, _) in cfg.sizes.iter().enumerate() {
        for &m in &cfg.methods {
            if m.theta(&SelectionConfig::default()).is_some() {
                for &t in &cfg.thetas {
                    groups.push((m, Some(t), si));
                }
            } else {
                groups.push((m, None, si));
            }
        }
    }

    let rows: Vec<BenchRow> = groups
        .par_iter()
        .map(|&(method, theta, si)| {
            let opts = cfg.options(theta);
            let repeats = if method.is_randomized() { cfg.repeats } else { 1 };
            let runs: Vec<std::result::Result<SolveReport, String>> = instances[si]
                .par_iter()
                .flat_map_iter(|inst| (0..repeats).map(move |i| (inst, i)))
                .map(|(inst, i)| {
                    let inst = inst.as_ref().map_err(Clone::clone)?;
                    run_method(method, &inst.a, &inst.b, &inst.x_star, &opts, repeat_seed(inst.seed, i))
                        .map_err(|e| e.to_string())
                })
                .collect();
            let ok: Vec<SolveReport> = runs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
            let error = runs.iter().find_map(|r| r.as_ref().err().cloned());
            let summary = RunSummary::from_reports(&ok).ok();
            BenchRow {
                method,
                theta,
                size: cfg.sizes[si],
                runs: runs.len(),
                failures: runs.len() - ok.len(),
                mean_iterations: summary.as_ref().map_or(f64::NAN, |s| s.mean_iterations),
                mean_seconds: summary.as_ref().map_or(f64::NAN, |s| s.mean_seconds),
                mean_final_rse: summary.as_ref().map_or(f64::NAN, |s| s.mean_final_rse),
                converged: summary.as_ref().map_or(0, |s| s.converged),
                error,
            }
        })
        .collect();

    let mut by_key: BTreeMap<(usize, u64, Method), f64> = BTreeMap::new();
    for (row, &(_, _, si)) in rows.iter().zip(&groups) {
        if let Some(t) = row.theta {
            by_key.insert((si, t.to_bits(), row.method), row.mean_iterations);
        }
    }
    let mut trends = Vec::new();
    for (si, size) in cfg.sizes.iter().enumerate() {
        for &t in &cfg.thetas {
            for (baseline, method) in [(Method::Rgrk, Method::Rgdr), (Method::Rgrcd, Method::Rgdc)] {
                let base = by_key.get(&(si, t.to_bits(), baseline));
                let ours = by_key.get(&(si, t.to_bits(), method));
                if let (Some(&b), Some(&o)) = (base, ours) {
                    trends.push(TrendRow {
                        size: *size,
                        theta: t,
                        baseline,
                        method,
                        it_ratio: b / o,
                    });
                }
            }
        }
    }
    Ok(BenchResult { rows, trends })
}

fn size_label(s: &BenchSize) -> String {
    match s.kind {
        ProblemKind::Randn => "randn".into(),
        ProblemKind::Smatrix { r, sigma1, sigma2 } => format!("smatrix(r={r};s1={sigma1};s2={sigma2})"),
        ProblemKind::Custom => "custom".into(),
    }
}

/// `method,theta,generator,m,n,runs,failures,mean_it,mean_cpu,mean_final_rse,converged,error`.
pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "method",
        "theta",
        "generator",
        "m",
        "n",
        "runs",
        "failures",
        "mean_it",
        "mean_cpu",
        "mean_final_rse",
        "converged",
        "error",
    ])
    .map_err(csv_err)?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            fmt_theta(r.theta),
            size_label(&r.size),
            r.size.m.to_string(),
            r.size.n.to_string(),
            r.runs.to_string(),
            r.failures.to_string(),
            format!("{:.1}", r.mean_iterations),
            format!("{:.6}", r.mean_seconds),
            format!("{:e}", r.mean_final_rse),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `generator,m,n,theta,baseline,method,it_ratio`.
pub fn write_trend_csv<W: Write>(w: W, rows: &[TrendRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["generator", "m", "n", "theta", "baseline", "method", "it_ratio"])
        .map_err(csv_err)?;
    for r in rows {
        out.write_record([
            size_label(&r.size),
            r.size.m.to_string(),
            r.size.n.to_string(),
            r.theta.to_string(),
            r.baseline.name().to_string(),
            r.method.name().to_string(),
            format!("{:.3}", r.it_ratio),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

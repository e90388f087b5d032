//! Parallel Monte Carlo trials, quantile curves and empirical coverage.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{FormulaId, Variant};
use crate::chains::sample_stationary_path;
use crate::error::{Error, Result};
use crate::lab::config::Experiment;
use crate::lab::stats::{mean, quantile_sorted};
use crate::rng::derive_seed;
use crate::ssmgd::{run_decomposed, Trajectory};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SSMGD_THREADS";

/// Median, `(1−δ)`-quantile and mean of one quantity at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub quantile: f64,
    pub mean: f64,
}

impl Summary {
    fn of(values: &[f64], level: f64) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary { median: quantile_sorted(&sorted, 0.5), quantile: quantile_sorted(&sorted, level), mean: mean(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub total_err: Summary,
    pub init_err: Summary,
    pub samp_err: Summary,
    pub samp_err_sq: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCurve {
    /// `1 − δ`.
    pub level: f64,
    pub points: Vec<CurvePoint>,
}

impl QuantileCurve {
    pub fn checkpoints(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn median_total(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total_err.median).collect()
    }
}

/// Aggregated output of [`monte_carlo`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub curve: QuantileCurve,
    /// `samp_err²` per checkpoint (outer) and trial (inner).
    pub samp_err_sq: Vec<Vec<f64>>,
    pub init_err: Vec<Vec<f64>>,
    pub decomposition_gap: Vec<Vec<f64>>,
}

/// Runs `f` on a pool sized by `SSMGD_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(f),
        _ => f(),
    }
}

/// One trial: a fresh stationary path with seed `hash(base_seed, index)`.
pub fn run_trial(exp: &Experiment, index: usize) -> Result<Trajectory> {
    let last = *exp.checkpoints.last().unwrap();
    let seed = derive_seed(exp.config.seed, index as u64);
    let path = sample_stationary_path(&exp.chain, last, seed)?;
    run_decomposed(&exp.problem, &path, &exp.schedule, &exp.w1, &exp.checkpoints).map_err(|e| match e {
        Error::NonFinite { t, .. } => Error::NonFinite { t, trial: Some(index) },
        other => other,
    })
}

/// Runs every trial in parallel, then aggregates once all have finished.
/// Results depend only on the configuration.
pub fn monte_carlo(exp: &Experiment) -> Result<MonteCarloResult> {
    let n = exp.config.trials;
    let trajectories: Vec<Trajectory> =
        with_pool(|| (0..n).into_par_iter().map(|i| run_trial(exp, i)).collect::<Result<Vec<_>>>())?;
    Ok(aggregate(&exp.checkpoints, &trajectories, 1.0 - exp.config.delta))
}

fn column(trajs: &[Trajectory], pick: impl for<'a> Fn(&'a Trajectory) -> &'a [f64], j: usize) -> Vec<f64> {
    trajs.iter().map(|tr| pick(tr).get(j).copied().unwrap_or(f64::NAN)).collect()
}

pub fn aggregate(checkpoints: &[usize], trajs: &[Trajectory], level: f64) -> MonteCarloResult {
    fn init(tr: &Trajectory) -> &[f64] {
        tr.init_err.as_deref().unwrap_or(&[])
    }
    fn samp(tr: &Trajectory) -> &[f64] {
        tr.samp_err.as_deref().unwrap_or(&[])
    }
    fn gap(tr: &Trajectory) -> &[f64] {
        tr.decomposition_gap.as_deref().unwrap_or(&[])
    }
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut samp_sq_all = Vec::with_capacity(checkpoints.len());
    let mut init_all = Vec::with_capacity(checkpoints.len());
    let mut gap_all = Vec::with_capacity(checkpoints.len());
    for (j, &t) in checkpoints.iter().enumerate() {
        let total = column(trajs, |tr| tr.total_err.as_slice(), j);
        let init_j = column(trajs, init, j);
        let samp_j = column(trajs, samp, j);
        let samp_sq: Vec<f64> = samp_j.iter().map(|s| s * s).collect();
        points.push(CurvePoint {
            t,
            total_err: Summary::of(&total, level),
            init_err: Summary::of(&init_j, level),
            samp_err: Summary::of(&samp_j, level),
            samp_err_sq: Summary::of(&samp_sq, level),
        });
        samp_sq_all.push(samp_sq);
        init_all.push(init_j);
        gap_all.push(column(trajs, gap, j));
    }
    MonteCarloResult {
        curve: QuantileCurve { level, points },
        samp_err_sq: samp_sq_all,
        init_err: init_all,
        decomposition_gap: gap_all,
    }
}

/// Fraction of trials whose `samp_err²` stays below the bound, per checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub fractions: Vec<f64>,
    pub formula: FormulaId,
    pub variant: Variant,
}

impl CoverageReport {
    /// Whether every checkpoint reaches `1 − δ − slack`.
    pub fn meets(&self, delta: f64, slack: f64) -> bool {
        self.fractions.iter().all(|&f| f >= 1.0 - delta - slack)
    }
}

pub fn coverage(samp_err_sq: &[Vec<f64>], bounds: &[f64]) -> Result<Vec<f64>> {
    if samp_err_sq.len() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), got: samp_err_sq.len() });
    }
    Ok(samp_err_sq
        .iter()
        .zip(bounds)
        .map(|(trials, &b)| {
            if trials.is_empty() {
                return 0.0;
            }
            trials.iter().filter(|&&s| s <= b).count() as f64 / trials.len() as f64
        })
        .collect())
}

pub fn coverage_report(exp: &Experiment, result: &MonteCarloResult) -> Result<CoverageReport> {
    let bounds = exp.samp_bounds()?;
    Ok(CoverageReport { fractions: coverage(&result.samp_err_sq, &bounds)?, formula: exp.formula, variant: exp.config.variant })
}

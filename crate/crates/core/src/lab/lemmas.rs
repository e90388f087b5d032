//! Grid audit of the three coefficient inequalities.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, Variant};
use crate::error::Result;

/// Absolute slack allowed before an inequality counts as violated.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// Product of step contractions vs. its closed form.
    ProductBound,
    /// ψ sum vs. its closed form.
    PsiBound,
    /// Weighted sum `Σ i^{−2}((i+1)/(t+1))^α` vs. its closed form.
    WeightedSum,
}

impl Lemma {
    pub fn as_str(self) -> &'static str {
        match self {
            Lemma::ProductBound => "product",
            Lemma::PsiBound => "psi",
            Lemma::WeightedSum => "weighted_sum",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LemmaGrid {
    pub thetas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// ψ and the weighted sum are checked at every `t ≤ t_max`.
    pub t_max: usize,
    /// Horizons at which the product inequality is checked for every `i < t`.
    pub product_ts: Vec<usize>,
    /// Points written to the CSV in addition to every violation.
    pub report_ts: Vec<usize>,
}

impl Default for LemmaGrid {
    fn default() -> Self {
        Self::with_t_max(10_000)
    }
}

impl LemmaGrid {
    pub fn with_t_max(t_max: usize) -> Self {
        let mut product_ts: Vec<usize> = (1..=100).collect();
        product_ts.extend([200, 500, 1000, 2000, 5000, 10_000]);
        product_ts.retain(|&t| t <= t_max);
        let mut report_ts = vec![1, 2, 5, 10, 100, 1000, 10_000];
        report_ts.retain(|&t| t <= t_max);
        LemmaGrid {
            thetas: vec![0.55, 0.65, 0.75, 0.85, 0.95, 1.0],
            alphas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            t_max,
            product_ts,
            report_ts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaRow {
    pub lemma: Lemma,
    pub variant: Variant,
    pub theta: Option<f64>,
    pub alpha: f64,
    pub i: Option<usize>,
    pub t: usize,
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub lemma: Lemma,
    pub variant: Variant,
    /// Asserted inequalities must hold; others are only reported.
    pub asserted: bool,
    pub evaluated: usize,
    pub violations: usize,
    /// Largest `exact − bound` among violations.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    pub summaries: Vec<LemmaSummary>,
}

impl LemmaReport {
    pub fn asserted_violations(&self) -> usize {
        self.summaries.iter().filter(|s| s.asserted).map(|s| s.violations).sum()
    }

    pub fn summary(&self, lemma: Lemma, variant: Variant) -> Option<&LemmaSummary> {
        self.summaries.iter().find(|s| s.lemma == lemma && s.variant == variant)
    }

    pub fn find(&self, lemma: Lemma, variant: Variant, theta: f64, alpha: f64, i: usize, t: usize) -> Option<&LemmaRow> {
        self.rows.iter().find(|r| {
            r.lemma == lemma
                && r.variant == variant
                && r.theta == Some(theta)
                && r.alpha == alpha
                && r.i == Some(i)
                && r.t == t
        })
    }
}

/// The paper-stated product variant is the only one not asserted.
fn asserted(lemma: Lemma, variant: Variant) -> bool {
    !(lemma == Lemma::ProductBound && variant == Variant::Paper)
}

/// Rows kept for output: sampled points, every violation of an asserted
/// inequality, and the worst violation of a reported-only one.
#[derive(Default)]
struct Tally {
    evaluated: usize,
    violations: usize,
    max_violation: f64,
    rows: Vec<LemmaRow>,
    worst: Option<LemmaRow>,
}

impl Tally {
    fn record(&mut self, row: LemmaRow, report: bool) {
        self.evaluated += 1;
        let keep_all = asserted(row.lemma, row.variant);
        if !row.holds {
            self.violations += 1;
            let gap = row.exact - row.bound;
            if gap > self.max_violation || self.worst.is_none() {
                self.max_violation = self.max_violation.max(gap);
                if !report && !keep_all {
                    self.worst = Some(row);
                }
            }
        }
        if report || (keep_all && !row.holds) {
            self.rows.push(row);
        }
    }

    fn finish(mut self) -> Self {
        if let Some(w) = self.worst.take() {
            self.rows.push(w);
        }
        self
    }
}

fn check(exact: f64, bound: f64) -> bool {
    exact <= bound + SLACK
}

fn audit_psi(grid: &LemmaGrid, theta: f64, alpha: f64) -> Result<Tally> {
    let mut tally = Tally::default();
    let series = bounds::psi_exact_series(grid.t_max, alpha, theta)?;
    for (idx, &exact) in series.iter().enumerate() {
        let t = idx + 1;
        let bound = bounds::psi_bound(t, alpha, theta)?;
        let row = LemmaRow {
            lemma: Lemma::PsiBound,
            variant: Variant::Paper,
            theta: Some(theta),
            alpha,
            i: None,
            t,
            exact,
            bound,
            holds: check(exact, bound),
        };
        tally.record(row, grid.report_ts.contains(&t));
    }
    Ok(tally.finish())
}

fn audit_product(grid: &LemmaGrid, theta: f64, alpha: f64, variant: Variant) -> Result<Tally> {
    let mut tally = Tally::default();
    for &t in &grid.product_ts {
        // walk i downward so the exact product is one multiplication per step
        let mut exact = 1.0;
        for i in (0..t).rev() {
            exact *= 1.0 - alpha / ((i + 1) as f64).powf(theta);
            let bound = bounds::product_bound(i, t, alpha, theta, variant)?;
            let row = LemmaRow {
                lemma: Lemma::ProductBound,
                variant,
                theta: Some(theta),
                alpha,
                i: Some(i),
                t,
                exact,
                bound,
                holds: check(exact, bound),
            };
            let report = grid.report_ts.contains(&t) && (grid.report_ts.contains(&i) || i + 1 == t);
            tally.record(row, report);
        }
    }
    Ok(tally.finish())
}

fn audit_weighted(grid: &LemmaGrid, alpha: f64) -> Result<Tally> {
    let mut tally = Tally::default();
    for (idx, exact) in bounds::weighted_sum_series(grid.t_max, alpha)?.into_iter().enumerate() {
        let t = idx + 1;
        let bound = bounds::weighted_sum_bound(t, alpha)?;
        let row = LemmaRow {
            lemma: Lemma::WeightedSum,
            variant: Variant::Paper,
            theta: None,
            alpha,
            i: None,
            t,
            exact,
            bound,
            holds: check(exact, bound),
        };
        tally.record(row, grid.report_ts.contains(&t));
    }
    Ok(tally.finish())
}

/// Evaluates both sides of every inequality over the grid. Work is spread over
/// grid points; output order is fixed.
pub fn verify_lemmas(grid: &LemmaGrid) -> Result<LemmaReport> {
    #[derive(Clone, Copy)]
    enum Job {
        Psi(f64, f64),
        Product(f64, f64, Variant),
        Weighted(f64),
    }
    let mut jobs = Vec::new();
    for &th in &grid.thetas {
        for &a in &grid.alphas {
            jobs.push(Job::Psi(th, a));
        }
    }
    for variant in [Variant::Paper, Variant::Conservative] {
        for &th in &grid.thetas {
            for &a in &grid.alphas {
                jobs.push(Job::Product(th, a, variant));
            }
        }
    }
    for &a in &grid.alphas {
        jobs.push(Job::Weighted(a));
    }
    let tallies: Vec<(Lemma, Variant, Tally)> = jobs
        .par_iter()
        .map(|job| {
            Ok(match *job {
                Job::Psi(th, a) => (Lemma::PsiBound, Variant::Paper, audit_psi(grid, th, a)?),
                Job::Product(th, a, v) => (Lemma::ProductBound, v, audit_product(grid, th, a, v)?),
                Job::Weighted(a) => (Lemma::WeightedSum, Variant::Paper, audit_weighted(grid, a)?),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut summaries: Vec<LemmaSummary> = Vec::new();
    for (lemma, variant, tally) in tallies {
        let idx = match summaries.iter().position(|s| s.lemma == lemma && s.variant == variant) {
            Some(i) => i,
            None => {
                summaries.push(LemmaSummary {
                    lemma,
                    variant,
                    asserted: asserted(lemma, variant),
                    evaluated: 0,
                    violations: 0,
                    max_violation: 0.0,
                });
                summaries.len() - 1
            }
        };
        let s = &mut summaries[idx];
        s.evaluated += tally.evaluated;
        s.violations += tally.violations;
        s.max_violation = s.max_violation.max(tally.max_violation);
        rows.extend(tally.rows);
    }
    Ok(LemmaReport { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_finds_paper_counterexample() {
        let report = verify_lemmas(&LemmaGrid::with_t_max(20)).unwrap();
        assert_eq!(report.asserted_violations(), 0);
        let row = report.find(Lemma::ProductBound, Variant::Paper, 0.75, 0.1, 1, 2).unwrap();
        assert!(!row.holds);
    }
}

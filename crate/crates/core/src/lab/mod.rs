//! Experiment harness: configuration, Monte Carlo aggregation, coverage,
//! rate fitting, lemma audits and the CLI.

pub mod cli;
pub mod config;
pub mod lemmas;
pub mod montecarlo;
pub mod stats;

pub use config::{ChainSpec, Experiment, ExperimentConfig, FamilySpec, FormulaChoice};
pub use lemmas::{verify_lemmas, Lemma, LemmaGrid, LemmaReport};
pub use montecarlo::{coverage, coverage_report, monte_carlo, CoverageReport, MonteCarloResult, QuantileCurve};
pub use stats::{rate_fit, RateFit};

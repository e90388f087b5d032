//! Laboratory for gradient descent driven by strictly stationary Markov chains.
//!
//! - [`chains`]: finite-state chains and stationary path sampling
//! - [`mixing`]: exact φ/β mixing coefficients and decay envelopes
//! - [`oracle`]: affine gradient families (quadratic and RKHS) and their constants
//! - [`ssmgd`]: the recursion with its initial/sampling error split
//! - [`bounds`]: closed-form bounds and coefficient inequalities
//! - [`lab`]: Monte Carlo harness, coverage, rate fits, lemma audits and the CLI

// Domain checks are written as `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chains;
pub mod error;
pub mod lab;
pub mod mixing;
pub mod oracle;
pub mod rng;
pub mod ssmgd;

pub use error::{Error, Result};

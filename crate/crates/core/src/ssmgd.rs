//! The recursion `w_{t+1} = w_t − γ_t ∇V_{z_t}(w_t)` along a stationary path.
//!
//! With `r_t = w_t − w*` and `A_t = A(z_t)`, the residual splits exactly as
//! `r_t = u_t + v_t` where
//!
//! ```text
//! u_{t+1} = (I − γ_t A_t) u_t,                      u_1 = w_1 − w*
//! v_{t+1} = (I − γ_t A_t) v_t − γ_t ∇V_{z_t}(w*),   v_1 = 0
//! ```
//!
//! `‖u_t‖` is the initial error and `‖v_t‖` the sampling error.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chains::PathSample;
use crate::error::{domain, Error, Result};
use crate::oracle::GradientOracle;

const FINITE_CHECK_INTERVAL: usize = 1024;

/// `γ_t = 1 / (η t^θ)`.
pub fn step_size(theta: f64, eta: f64, t: usize) -> Result<f64> {
    Schedule::new(theta, eta)?.step(t)
}

/// Polynomially decaying step sizes with `θ ∈ (1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    theta: f64,
    eta: f64,
}

impl Schedule {
    pub fn new(theta: f64, eta: f64) -> Result<Self> {
        if !(theta > 0.5 && theta <= 1.0) {
            return Err(domain(format!("theta = {theta} must lie in (1/2, 1]")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(domain(format!("eta = {eta} must be positive and finite")));
        }
        Ok(Schedule { theta, eta })
    }

    /// Schedule with `η = ∞`, i.e. every step is zero. Only useful for testing
    /// that the iterate stays put.
    pub fn frozen(theta: f64) -> Self {
        Schedule { theta, eta: f64::INFINITY }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn step(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(domain("steps are indexed from t = 1"));
        }
        Ok(self.step_unchecked(t))
    }

    #[inline]
    fn step_unchecked(&self, t: usize) -> f64 {
        1.0 / (self.eta * (t as f64).powf(self.theta))
    }
}

/// A gradient family together with its minimizer under the stationary law.
#[derive(Debug, Clone)]
pub struct Problem<F> {
    family: F,
    w_star: DVector<f64>,
    noise: Vec<DVector<f64>>,
}

impl<F: GradientOracle> Problem<F> {
    /// `w_star` must solve the ρ-averaged system; see [`crate::oracle::Family::minimizer`].
    pub fn new(family: F, w_star: DVector<f64>) -> Result<Self> {
        family.check_point(&w_star)?;
        let noise = (0..family.n_states())
            .map(|z| family.gradient(z, &w_star))
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem { family, w_star, noise })
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    /// `∇V_z(w*)`.
    pub fn noise_at_optimum(&self, z: usize) -> &DVector<f64> {
        &self.noise[z]
    }
}

/// Errors recorded at checkpoint times. `init_err`, `samp_err` and
/// `decomposition_gap` are only present for decomposed runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub checkpoints: Vec<usize>,
    pub total_err: Vec<f64>,
    pub init_err: Option<Vec<f64>>,
    pub samp_err: Option<Vec<f64>>,
    /// `‖(w_t − w*) − (u_t + v_t)‖`.
    pub decomposition_gap: Option<Vec<f64>>,
    pub step_size: Vec<f64>,
}

/// `{1, 2, 4, …, T}`.
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = std::iter::successors(Some(1usize), |&t| t.checked_mul(2))
        .take_while(|&t| t < horizon)
        .collect();
    if horizon >= 1 {
        cps.push(horizon);
    }
    cps.dedup();
    cps
}

fn validate<F: GradientOracle>(
    problem: &Problem<F>,
    path: &PathSample,
    w1: &DVector<f64>,
    checkpoints: &[usize],
) -> Result<()> {
    problem.family.check_point(w1)?;
    if checkpoints.is_empty() {
        return Err(domain("at least one checkpoint is required"));
    }
    if checkpoints[0] < 1 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("checkpoints must be strictly increasing and start at t ≥ 1"));
    }
    let last = *checkpoints.last().unwrap();
    if last > path.len() {
        return Err(domain(format!("checkpoint {last} beyond path length {}", path.len())));
    }
    let n = problem.family.n_states();
    if let Some(&bad) = path.states[..last - 1].iter().find(|&&z| z >= n) {
        return Err(domain(format!("path visits state {bad} but family has {n} states")));
    }
    Ok(())
}

fn nonfinite_guard(v: &DVector<f64>, t: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t, trial: None })
    }
}

/// Plain recursion; records `‖w_t − w*‖` only.
pub fn run<F: GradientOracle>(
    problem: &Problem<F>,
    path: &PathSample,
    schedule: &Schedule,
    w1: &DVector<f64>,
    checkpoints: &[usize],
) -> Result<Trajectory> {
    validate(problem, path, w1, checkpoints)?;
    let family = &problem.family;
    let mut w = w1.clone();
    let mut grad = DVector::zeros(family.dim());
    let mut diff = DVector::zeros(family.dim());
    let mut total_err = Vec::with_capacity(checkpoints.len());
    let mut steps = Vec::with_capacity(checkpoints.len());
    let last = *checkpoints.last().unwrap();
    let mut next = 0;
    for t in 1..=last {
        let gamma = schedule.step_unchecked(t);
        if t == checkpoints[next] {
            nonfinite_guard(&w, t)?;
            diff.copy_from(&w);
            diff -= &problem.w_star;
            total_err.push(family.norm(&diff)?);
            steps.push(gamma);
            next += 1;
        }
        if t == last {
            break;
        }
        if t % FINITE_CHECK_INTERVAL == 0 {
            nonfinite_guard(&w, t)?;
        }
        let z = path.states[t - 1];
        family.apply_operator(z, &w, &mut grad);
        grad += family.offset(z);
        w.axpy(-gamma, &grad, 1.0);
    }
    Ok(Trajectory {
        checkpoints: checkpoints.to_vec(),
        total_err,
        init_err: None,
        samp_err: None,
        decomposition_gap: None,
        step_size: steps,
    })
}

/// Runs the recursion alongside its initial/sampling decomposition.
pub fn run_decomposed<F: GradientOracle>(
    problem: &Problem<F>,
    path: &PathSample,
    schedule: &Schedule,
    w1: &DVector<f64>,
    checkpoints: &[usize],
) -> Result<Trajectory> {
    validate(problem, path, w1, checkpoints)?;
    let family = &problem.family;
    let d = family.dim();
    let mut w = w1.clone();
    let mut u = w1 - &problem.w_star;
    let mut v = DVector::zeros(d);
    let mut scratch = DVector::zeros(d);
    let mut diff = DVector::zeros(d);
    let n = checkpoints.len();
    let (mut total_err, mut init_err, mut samp_err, mut gap, mut steps) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let last = *checkpoints.last().unwrap();
    let mut next = 0;
    for t in 1..=last {
        let gamma = schedule.step_unchecked(t);
        if t == checkpoints[next] {
            for x in [&w, &u, &v] {
                nonfinite_guard(x, t)?;
            }
            diff.copy_from(&w);
            diff -= &problem.w_star;
            total_err.push(family.norm(&diff)?);
            init_err.push(family.norm(&u)?);
            samp_err.push(family.norm(&v)?);
            diff -= &u;
            diff -= &v;
            gap.push(family.norm(&diff)?);
            steps.push(gamma);
            next += 1;
        }
        if t == last {
            break;
        }
        if t % FINITE_CHECK_INTERVAL == 0 {
            for x in [&w, &u, &v] {
                nonfinite_guard(x, t)?;
            }
        }
        let z = path.states[t - 1];
        family.apply_operator(z, &w, &mut scratch);
        scratch += family.offset(z);
        w.axpy(-gamma, &scratch, 1.0);

        family.apply_operator(z, &u, &mut scratch);
        u.axpy(-gamma, &scratch, 1.0);

        family.apply_operator(z, &v, &mut scratch);
        scratch += &problem.noise[z];
        v.axpy(-gamma, &scratch, 1.0);
    }
    Ok(Trajectory {
        checkpoints: checkpoints.to_vec(),
        total_err,
        init_err: Some(init_err),
        samp_err: Some(samp_err),
        decomposition_gap: Some(gap),
        step_size: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_size_examples() {
        assert_relative_eq!(step_size(0.75, 2.0, 16).unwrap(), 0.0625, max_relative = 1e-15);
        assert_relative_eq!(step_size(1.0, 1.0, 10).unwrap(), 0.1, max_relative = 1e-15);
        assert_eq!(step_size(0.75, 1.0, 1).unwrap(), 1.0);
        assert!(step_size(0.5, 1.0, 1).is_err());
        assert!(step_size(1.1, 1.0, 1).is_err());
        assert!(step_size(0.75, 0.0, 1).is_err());
        assert!(step_size(0.75, 1.0, 0).is_err());
    }

    #[test]
    fn frozen_schedule_steps_are_zero() {
        assert_eq!(Schedule::frozen(0.75).step(5).unwrap(), 0.0);
    }

    #[test]
    fn default_checkpoints_are_powers_of_two() {
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(default_checkpoints(16), vec![1, 2, 4, 8, 16]);
    }
}

//! Closed-form error bounds and the coefficient inequalities behind them.
//!
//! Each inequality has an `_exact` side evaluated by direct summation or
//! multiplication and a `_bound` side evaluated in closed form. The
//! product inequality `∏_{k=i+1}^t (1 − α/k^θ) ≤ exp(c·α/(1−θ)·((i+1)^{1−θ} − (t+1)^{1−θ}))`
//! is offered with `c = 2` ([`Variant::Paper`]) and `c = 1`
//! ([`Variant::Conservative`]); only the latter holds in general, e.g. it fails
//! for `c = 2` at `α = 0.1, θ = 0.75, i = 1, t = 2`. The same factor appears in
//! the initial-error bound.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixing::{ExponentialEnvelope, PolynomialEnvelope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Paper,
    Conservative,
}

impl Variant {
    fn exponent_factor(self) -> f64 {
        match self {
            Variant::Paper => 2.0,
            Variant::Conservative => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Paper => "paper",
            Variant::Conservative => "conservative",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Variant::Paper),
            "conservative" => Ok(Variant::Conservative),
            other => Err(Error::Config(format!("unknown bound variant {other:?}"))),
        }
    }
}

fn check_theta_open(theta: f64) -> Result<()> {
    if theta > 0.5 && theta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("theta = {theta} must lie in (1/2, 1)")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.5 && theta <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("theta = {theta} must lie in (1/2, 1]")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha = {alpha} must lie in (0, 1]")))
    }
}

fn check_t(t: usize) -> Result<()> {
    if t >= 1 {
        Ok(())
    } else {
        Err(domain("t must be at least 1"))
    }
}

/// `C_θ = 8 + 2/(2θ−1) · (θ / (e(2 − 2^θ)))^{θ/(1−θ)}` for `θ ∈ (1/2, 1)`.
pub fn c_theta(theta: f64) -> Result<f64> {
    check_theta_open(theta)?;
    let base = theta / (std::f64::consts::E * (2.0 - theta.exp2()));
    Ok(8.0 + 2.0 / (2.0 * theta - 1.0) * base.powf(theta / (1.0 - theta)))
}

/// `ψ(t) = Σ_{i=1}^t i^{−2θ} ∏_{k=i+1}^t (1 − α/k^θ)²`.
///
/// The argument counts the summation range directly: this is the quantity
/// bounded by [`psi_bound`] at the same `t`.
pub fn psi_exact(t: usize, alpha: f64, theta: f64) -> Result<f64> {
    Ok(*psi_exact_series(t, alpha, theta)?.last().unwrap())
}

/// `ψ(1), …, ψ(t_max)` via `ψ(t) = (1 − α/t^θ)² ψ(t−1) + t^{−2θ}`.
pub fn psi_exact_series(t_max: usize, alpha: f64, theta: f64) -> Result<Vec<f64>> {
    check_t(t_max)?;
    check_alpha(alpha)?;
    check_theta(theta)?;
    let mut out = Vec::with_capacity(t_max);
    let mut psi = 0.0;
    for t in 1..=t_max {
        let tf = t as f64;
        let f = 1.0 - alpha / tf.powf(theta);
        psi = f * f * psi + tf.powf(-2.0 * theta);
        out.push(psi);
    }
    Ok(out)
}

/// Closed-form majorant of [`psi_exact`]. For `θ < 1` it is
/// `C_θ α^{−θ/(1−θ)} (t+1)^{−θ}`; for `θ = 1` it switches on α:
///
/// | α         | bound                         |
/// |-----------|-------------------------------|
/// | (0, ½)    | `4/(1−2α) · (t+1)^{−2α}`      |
/// | ½         | `4 (t+1)^{−1} ln(t+1)`        |
/// | (½, 1)    | `6/(2α−1) · (t+1)^{−1}`       |
/// | 1         | `6 (t+1)^{−1}`                |
pub fn psi_bound(t: usize, alpha: f64, theta: f64) -> Result<f64> {
    check_t(t)?;
    check_alpha(alpha)?;
    check_theta(theta)?;
    let s = (t + 1) as f64;
    if theta < 1.0 {
        return Ok(c_theta(theta)? * alpha.powf(-theta / (1.0 - theta)) * s.powf(-theta));
    }
    Ok(if alpha < 0.5 {
        4.0 / (1.0 - 2.0 * alpha) * s.powf(-2.0 * alpha)
    } else if alpha == 0.5 {
        4.0 * s.ln() / s
    } else if alpha < 1.0 {
        6.0 / (2.0 * alpha - 1.0) / s
    } else {
        6.0 / s
    })
}

/// `∏_{k=i+1}^t (1 − α/k^θ)`; the empty product is 1. `α = 0` is accepted.
pub fn product_exact(i: usize, t: usize, alpha: f64, theta: f64) -> Result<f64> {
    if i > t {
        return Err(domain(format!("need i ≤ t, got i = {i}, t = {t}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(domain(format!("theta = {theta} must lie in (0, 1]")));
    }
    Ok((i + 1..=t).map(|k| 1.0 - alpha / (k as f64).powf(theta)).product())
}

/// Closed-form majorant of [`product_exact`]: `((i+1)/(t+1))^α` for `θ = 1`,
/// otherwise the exponential form with the variant's factor on α.
pub fn product_bound(i: usize, t: usize, alpha: f64, theta: f64, variant: Variant) -> Result<f64> {
    if i > t {
        return Err(domain(format!("need i ≤ t, got i = {i}, t = {t}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(domain(format!("theta = {theta} must lie in (0, 1]")));
    }
    let (a, b) = ((i + 1) as f64, (t + 1) as f64);
    if theta == 1.0 {
        return Ok((a / b).powf(alpha));
    }
    let e = 1.0 - theta;
    Ok((variant.exponent_factor() * alpha / e * (a.powf(e) - b.powf(e))).exp())
}

/// `Σ_{i=1}^t i^{−2} ((i+1)/(t+1))^α`.
pub fn weighted_sum_exact(t: usize, alpha: f64) -> Result<f64> {
    Ok(*weighted_sum_series(t, alpha)?.last().unwrap())
}

/// [`weighted_sum_exact`] for every `t ≤ t_max`, from the prefix sums of
/// `(i+1)^α / i²`.
pub fn weighted_sum_series(t_max: usize, alpha: f64) -> Result<Vec<f64>> {
    check_t(t_max)?;
    check_alpha(alpha)?;
    let mut acc = 0.0;
    Ok((1..=t_max)
        .map(|t| {
            let tf = t as f64;
            acc += (tf + 1.0).powf(alpha) / (tf * tf);
            acc / (tf + 1.0).powf(alpha)
        })
        .collect())
}

/// `6/(1−α) (t+1)^{−α}` for `α < 1`, `6 ln(t+1)/(t+1)` at `α = 1`.
pub fn weighted_sum_bound(t: usize, alpha: f64) -> Result<f64> {
    check_t(t)?;
    check_alpha(alpha)?;
    let s = (t + 1) as f64;
    Ok(if alpha < 1.0 { 6.0 / (1.0 - alpha) * s.powf(-alpha) } else { 6.0 * s.ln() / s })
}

/// Bound on `‖u_t‖`: `exp(c·α/(1−θ)·(1 − t^{1−θ}))‖w_1 − w*‖` for `θ < 1`,
/// `t^{−α}‖w_1 − w*‖` for `θ = 1`.
pub fn init_bound(t: usize, theta: f64, alpha: f64, r1_norm: f64, variant: Variant) -> Result<f64> {
    check_t(t)?;
    check_theta(theta)?;
    check_alpha(alpha)?;
    if !(r1_norm >= 0.0) {
        return Err(domain("initial distance must be nonnegative"));
    }
    let tf = t as f64;
    if theta == 1.0 {
        return Ok(tf.powf(-alpha) * r1_norm);
    }
    let e = 1.0 - theta;
    Ok((variant.exponent_factor() * alpha / e * (1.0 - tf.powf(e))).exp() * r1_norm)
}

/// Constants shared by every sampling-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBoundInputs {
    pub theta: f64,
    pub alpha: f64,
    pub sigma2: f64,
    pub eta: f64,
    pub delta: f64,
}

impl SampleBoundInputs {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        check_alpha(self.alpha)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(domain(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(domain("sigma2 must be finite and nonnegative"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(domain("eta must be positive and finite"));
        }
        Ok(())
    }

    /// `σ² C_θ / (δη²) · α^{−θ/(1−θ)} · t^{−θ}`, the bound for independent samples.
    pub fn iid_bound(&self, t: usize) -> Result<f64> {
        self.validate()?;
        check_t(t)?;
        let th = self.theta;
        check_theta_open(th)?;
        Ok(self.sigma2 * c_theta(th)? / (self.delta * self.eta * self.eta)
            * self.alpha.powf(-th / (1.0 - th))
            * (t as f64).powf(-th))
    }
}

fn envelope_tail(env: &ExponentialEnvelope) -> Result<f64> {
    if env.is_zero() {
        return Ok(0.0);
    }
    crate::mixing::geometric_tail_sum(env.d, env.r)
}

/// High-probability bound on `E²_samp(t)` under `φ_t ≤ D r^t`:
/// `iid_bound(t) · (1 + 4Dr/(1−r))`.
pub fn samp_bound_exp_phi(t: usize, inputs: &SampleBoundInputs, env: &ExponentialEnvelope) -> Result<f64> {
    Ok(inputs.iid_bound(t)? * (1.0 + 4.0 * envelope_tail(env)?))
}

/// Same shape under a β-envelope `β_t ≤ D₁ r₁^t`.
pub fn samp_bound_exp_beta(t: usize, inputs: &SampleBoundInputs, env: &ExponentialEnvelope) -> Result<f64> {
    samp_bound_exp_phi(t, inputs, env)
}

/// `θ = 1`, `α ∈ (0, ½)`: `4σ²/(δη²) · 1/(1−2α) · t^{−α} · (1 + 6Dr/(1−r))`.
pub fn samp_bound_theta1(t: usize, inputs: &SampleBoundInputs, env: &ExponentialEnvelope) -> Result<f64> {
    inputs.validate()?;
    check_t(t)?;
    if inputs.theta != 1.0 {
        return Err(domain("the theta = 1 bound needs theta = 1"));
    }
    let a = inputs.alpha;
    if a >= 0.5 {
        return Err(domain(format!("alpha = {a} outside (0, 1/2)")));
    }
    Ok(4.0 * inputs.sigma2 / (inputs.delta * inputs.eta * inputs.eta) / (1.0 - 2.0 * a)
        * (t as f64).powf(-a)
        * (1.0 + 6.0 * envelope_tail(env)?))
}

/// Bound driven by the exact partial sum `S_t = Σ_{i≤t} φ_i`:
/// `iid_bound(t) · (1 + 4 S_t)`.
pub fn samp_bound_generic(t: usize, inputs: &SampleBoundInputs, partial_sum: f64) -> Result<f64> {
    if !(partial_sum >= 0.0) {
        return Err(domain("partial sum must be nonnegative"));
    }
    Ok(inputs.iid_bound(t)? * (1.0 + 4.0 * partial_sum))
}

/// Rate exponent of `‖w_t − w*‖` under `φ_t ≤ b t^{−k}`, and whether a
/// `(log t)^{1/2}` factor accompanies it.
pub fn poly_rate_exponent(theta: f64, k: f64) -> Result<(f64, bool)> {
    check_theta_open(theta)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(domain(format!("k = {k} must be positive")));
    }
    Ok(if k < 1.0 {
        ((1.0 - k - theta) / 2.0, false)
    } else if k == 1.0 {
        (-theta / 2.0, true)
    } else {
        (-theta / 2.0, false)
    })
}

/// `b Σ_{i≤t} i^{−k}`, the partial-sum majorant implied by a polynomial envelope.
pub fn polynomial_partial_sum(env: &PolynomialEnvelope, t: usize) -> f64 {
    if env.is_zero() {
        return 0.0;
    }
    env.b * (1..=t).map(|i| (i as f64).powf(-env.k)).sum::<f64>()
}

/// Which mixing information feeds a sampling bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingEnvelope {
    Exponential(ExponentialEnvelope),
    Polynomial(PolynomialEnvelope),
    /// `S_1, S_2, …` with index `t − 1` holding `S_t`.
    PartialSums { sums: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    #[serde(flatten)]
    pub inputs: SampleBoundInputs,
    pub envelope: MixingEnvelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormulaId {
    #[serde(rename = "thm1-phi")]
    Thm1Phi,
    #[serde(rename = "thm-beta")]
    ThmBeta,
    #[serde(rename = "prop-theta1")]
    PropTheta1,
    #[serde(rename = "generic-partial-sum")]
    GenericPartialSum,
    #[serde(rename = "poly-rate")]
    PolyRate,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::Thm1Phi => "thm1-phi",
            FormulaId::ThmBeta => "thm-beta",
            FormulaId::PropTheta1 => "prop-theta1",
            FormulaId::GenericPartialSum => "generic-partial-sum",
            FormulaId::PolyRate => "poly-rate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: usize,
    pub init_bound: f64,
    pub samp_bound_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub formula: FormulaId,
    pub variant: Variant,
    pub rows: Vec<BoundRow>,
}

impl BoundParams {
    /// Compact description of the envelope; partial sums are summarized.
    pub fn envelope_summary(&self) -> serde_json::Value {
        match &self.envelope {
            MixingEnvelope::PartialSums { sums } => serde_json::json!({
                "kind": "partial_sums",
                "len": sums.len(),
                "last": sums.last(),
            }),
            other => serde_json::to_value(other).unwrap_or_default(),
        }
    }

    /// Sampling bound of `formula` at time `t`.
    pub fn samp_bound(&self, formula: FormulaId, t: usize) -> Result<f64> {
        let mismatch = || Error::Config(format!("formula {} does not accept this envelope", formula.as_str()));
        match (formula, &self.envelope) {
            (FormulaId::Thm1Phi, MixingEnvelope::Exponential(e)) => samp_bound_exp_phi(t, &self.inputs, e),
            (FormulaId::ThmBeta, MixingEnvelope::Exponential(e)) => samp_bound_exp_beta(t, &self.inputs, e),
            (FormulaId::PropTheta1, MixingEnvelope::Exponential(e)) => samp_bound_theta1(t, &self.inputs, e),
            (FormulaId::GenericPartialSum, MixingEnvelope::PartialSums { sums }) => {
                let s = *sums.get(t - 1).ok_or(Error::Index { index: t, len: sums.len() })?;
                samp_bound_generic(t, &self.inputs, s)
            }
            (FormulaId::PolyRate, MixingEnvelope::Polynomial(p)) => {
                samp_bound_generic(t, &self.inputs, polynomial_partial_sum(p, t))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn report(&self, formula: FormulaId, variant: Variant, checkpoints: &[usize], r1_norm: f64) -> Result<BoundReport> {
        let rows = checkpoints
            .iter()
            .map(|&t| {
                Ok(BoundRow {
                    t,
                    init_bound: init_bound(t, self.inputs.theta, self.inputs.alpha, r1_norm, variant)?,
                    samp_bound_sq: self.samp_bound(formula, t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.iter().any(|r| !(r.init_bound.is_finite() && r.samp_bound_sq.is_finite())) {
            return Err(domain("bound evaluated to a non-finite value"));
        }
        Ok(BoundReport { formula, variant, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn c_theta_domain() {
        assert!(c_theta(1.0).is_err());
        assert!(c_theta(0.5).is_err());
        assert!(c_theta(0.55).unwrap() > 8.0);
    }

    #[test]
    fn psi_single_term() {
        for (a, th) in [(0.1, 0.6), (1.0, 1.0), (0.5, 0.75)] {
            assert_eq!(psi_exact(1, a, th).unwrap(), 1.0);
        }
        assert_relative_eq!(psi_exact(2, 1.0, 1.0).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn theta_one_branches() {
        assert_relative_eq!(psi_bound(1, 1.0, 1.0).unwrap(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(psi_bound(1, 0.5, 1.0).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(psi_bound(3, 0.25, 1.0).unwrap(), 8.0 * 4f64.powf(-0.5), max_relative = 1e-15);
        assert_relative_eq!(psi_bound(3, 0.75, 1.0).unwrap(), 12.0 / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn products() {
        assert_eq!(product_exact(7, 7, 0.3, 0.8).unwrap(), 1.0);
        assert_eq!(product_exact(1, 9, 0.0, 0.8).unwrap(), 1.0);
        assert_relative_eq!(product_exact(1, 9, 1.0, 1.0).unwrap(), 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(product_bound(1, 9, 1.0, 1.0, Variant::Paper).unwrap(), 0.2, max_relative = 1e-15);
        assert!(product_exact(3, 2, 0.5, 0.5).is_err());
    }

    #[test]
    fn init_bound_examples() {
        assert_eq!(init_bound(1, 0.75, 0.5, 3.0, Variant::Paper).unwrap(), 3.0);
        assert_relative_eq!(init_bound(16, 1.0, 0.25, 2.0, Variant::Conservative).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            init_bound(16, 0.75, 0.5, 1.0, Variant::Conservative).unwrap(),
            (-2.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn theta1_domain() {
        let inputs = SampleBoundInputs { theta: 1.0, alpha: 0.5, sigma2: 1.0, eta: 1.0, delta: 0.1 };
        assert!(samp_bound_theta1(16, &inputs, &ExponentialEnvelope::ZERO).is_err());
        let inputs = SampleBoundInputs { theta: 0.75, alpha: 0.25, ..inputs };
        assert!(samp_bound_theta1(16, &inputs, &ExponentialEnvelope::ZERO).is_err());
    }

    #[test]
    fn formula_envelope_mismatch() {
        let p = BoundParams {
            inputs: SampleBoundInputs { theta: 0.75, alpha: 0.5, sigma2: 1.0, eta: 1.0, delta: 0.1 },
            envelope: MixingEnvelope::Polynomial(PolynomialEnvelope { b: 1.0, k: 2.0 }),
        };
        assert!(p.samp_bound(FormulaId::Thm1Phi, 10).is_err());
        assert!(p.samp_bound(FormulaId::PolyRate, 10).is_ok());
    }
}

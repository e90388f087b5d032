//! Exact φ- and β-mixing coefficients of finite chains, and envelope fitting.
//!
//! For a chain with kernel `P` and stationary law `ρ`,
//!
//! ```text
//! φ_t = max_{z : ρ(z) > 0} d_TV(P^t(z, ·), ρ)
//! β_t = Σ_z ρ(z) d_TV(P^t(z, ·), ρ)
//! ```
//!
//! so `0 ≤ β_t ≤ φ_t ≤ 1` always. States with `ρ(z) = 0` are excluded from the
//! maximum since they form a ρ-null set.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chains::ChainModel;
use crate::error::{domain, Error, Result};

/// Values at or below this are treated as exact zeros when fitting envelopes.
pub const ZERO_FLOOR: f64 = 1e-14;
const RENORMALIZE_DRIFT: f64 = 1e-13;

/// `sup_B |μ(B) − ν(B)| = ½ Σ |μ_i − ν_i|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: nu.len() });
    }
    for d in [mu, nu] {
        let sum: f64 = d.iter().sum();
        if d.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(domain("tv_distance needs probability distributions"));
        }
    }
    Ok(tv_unchecked(mu.iter().copied(), nu.iter().copied()))
}

fn tv_unchecked(mu: impl Iterator<Item = f64>, nu: impl Iterator<Item = f64>) -> f64 {
    0.5 * mu.zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// φ_t and β_t for `t = 1..=horizon`. Index `t − 1` holds time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub phi: Vec<f64>,
    pub beta: Vec<f64>,
    pub horizon: usize,
}

impl MixingProfile {
    pub fn phi_at(&self, t: usize) -> f64 {
        self.phi[t - 1]
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }
}

/// Computes both sequences from successive matrix powers.
///
/// Rather than forming `P^t` and subtracting `ρ`, which loses all relative
/// precision once the gap nears machine epsilon, the deviation
/// `Δ_t = P^t − 1ρᵀ` is propagated directly: `Δ_1 = P − 1ρᵀ` and
/// `Δ_{t+1} = Δ_t (P − 1ρᵀ)`, valid because `Δ_t 1 = 0` and `ρᵀP = ρᵀ`.
/// Then `d_TV(P^t(z, ·), ρ) = ½ Σ_j |Δ_t(z, j)|`.
pub fn mixing_profile(chain: &ChainModel, horizon: usize) -> Result<MixingProfile> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let n = chain.n_states();
    let rho = chain.stationary();
    let support: Vec<usize> = (0..n).filter(|&z| rho[z] > 0.0).collect();
    let centered = DMatrix::from_fn(n, n, |i, j| chain.transition()[(i, j)] - rho[j]);
    let mut deviation = centered.clone();
    let mut scratch = DMatrix::zeros(n, n);
    let mut phi = Vec::with_capacity(horizon);
    let mut beta = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        if t > 1 {
            deviation.mul_to(&centered, &mut scratch);
            std::mem::swap(&mut deviation, &mut scratch);
        }
        let mut worst: f64 = 0.0;
        let mut avg = 0.0;
        for &z in &support {
            let tv = (0.5 * deviation.row(z).iter().map(|x| x.abs()).sum::<f64>()).min(1.0);
            worst = worst.max(tv);
            avg += rho[z] * tv;
        }
        phi.push(worst);
        beta.push(avg.min(worst));
    }
    Ok(MixingProfile { phi, beta, horizon })
}

/// Reference computation through explicit powers `P^t` with row renormalization.
/// Accurate to about `1e-15` absolute; used to cross-check [`mixing_profile`].
pub fn mixing_profile_by_powers(chain: &ChainModel, horizon: usize) -> Result<MixingProfile> {
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    let p = chain.transition();
    let rho = chain.stationary();
    let support: Vec<usize> = (0..chain.n_states()).filter(|&z| rho[z] > 0.0).collect();
    let mut power: DMatrix<f64> = p.clone();
    let mut phi = Vec::with_capacity(horizon);
    let mut beta = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        if t > 1 {
            power = &power * p;
            renormalize_rows(&mut power);
        }
        let mut worst: f64 = 0.0;
        let mut avg = 0.0;
        for &z in &support {
            let tv = tv_unchecked(power.row(z).iter().copied(), rho.iter().copied());
            worst = worst.max(tv);
            avg += rho[z] * tv;
        }
        phi.push(worst);
        beta.push(avg.min(worst));
    }
    Ok(MixingProfile { phi, beta, horizon })
}

fn renormalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        if (s - 1.0).abs() > RENORMALIZE_DRIFT {
            row.unscale_mut(s);
        }
    }
}

pub fn phi_coefficients(chain: &ChainModel, horizon: usize) -> Result<Vec<f64>> {
    Ok(mixing_profile(chain, horizon)?.phi)
}

pub fn beta_coefficients(chain: &ChainModel, horizon: usize) -> Result<Vec<f64>> {
    Ok(mixing_profile(chain, horizon)?.beta)
}

/// `seq[t] ≤ D r^t`. The all-zero marker is `D = 0, r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialEnvelope {
    #[serde(rename = "D")]
    pub d: f64,
    pub r: f64,
}

impl ExponentialEnvelope {
    pub const ZERO: Self = ExponentialEnvelope { d: 0.0, r: 0.0 };

    pub fn is_zero(&self) -> bool {
        self.d == 0.0
    }

    pub fn value(&self, t: usize) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.d * self.r.powi(t as i32)
        }
    }

    /// `D r / (1 − r)`, the bound on `Σ_{t≥1} seq[t]`.
    pub fn tail_sum(&self) -> f64 {
        geometric_tail_sum(self.d, self.r).unwrap_or(f64::INFINITY)
    }
}

/// `seq[t] ≤ b t^{−k}`. The all-zero marker is `b = 0, k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialEnvelope {
    pub b: f64,
    pub k: f64,
}

impl PolynomialEnvelope {
    pub const ZERO: Self = PolynomialEnvelope { b: 0.0, k: 0.0 };

    pub fn is_zero(&self) -> bool {
        self.b == 0.0
    }

    pub fn value(&self, t: usize) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.b * (t as f64).powf(-self.k)
        }
    }
}

/// Ordinary least squares `y = intercept + slope·x`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn positive_points(seq: &[f64], abscissa: impl Fn(usize) -> f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if seq.iter().any(|x| x.is_nan() || *x < 0.0) {
        return Err(Error::Fit("sequence must be nonnegative".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = seq
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > ZERO_FLOOR)
        .map(|(i, &v)| (abscissa(i + 1), v.ln()))
        .unzip();
    match xs.len() {
        0 => Ok(None),
        1 => Err(Error::Fit("need at least two positive entries".into())),
        _ => Ok(Some((xs, ys))),
    }
}

/// Fits `D r^t` by least squares on `log seq[t]`, then inflates `D` until the
/// envelope dominates every entry. Returns [`ExponentialEnvelope::ZERO`] when
/// every entry is below [`ZERO_FLOOR`].
pub fn fit_exponential_envelope(seq: &[f64]) -> Result<ExponentialEnvelope> {
    let Some((ts, logs)) = positive_points(seq, |t| t as f64)? else {
        return Ok(ExponentialEnvelope::ZERO);
    };
    let (slope, _) = least_squares(&ts, &logs);
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("log-slope {slope} admits no geometric envelope with r < 1")));
    }
    let r = slope.exp();
    let d = seq
        .iter()
        .enumerate()
        .map(|(i, &v)| v / r.powi(i as i32 + 1))
        .fold(0.0, f64::max);
    Ok(ExponentialEnvelope { d, r })
}

/// Fits `b t^{−k}` by least squares on `log seq[t]` against `log t`, then inflates
/// `b` to majorize.
pub fn fit_polynomial_envelope(seq: &[f64]) -> Result<PolynomialEnvelope> {
    let Some((lts, logs)) = positive_points(seq, |t| (t as f64).ln())? else {
        return Ok(PolynomialEnvelope::ZERO);
    };
    let (slope, _) = least_squares(&lts, &logs);
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("log-log slope {slope} admits no decaying polynomial envelope")));
    }
    let k = -slope;
    let b = seq
        .iter()
        .enumerate()
        .map(|(i, &v)| v * ((i + 1) as f64).powf(k))
        .fold(0.0, f64::max);
    Ok(PolynomialEnvelope { b, k })
}

/// `D r / (1 − r)`.
pub fn geometric_tail_sum(d: f64, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(domain(format!("ratio r = {r} must lie in [0, 1)")));
    }
    if !(d >= 0.0) {
        return Err(domain(format!("D = {d} must be nonnegative")));
    }
    Ok(d * r / (1.0 - r))
}

/// `Σ_{i=1}^t seq[i]`.
pub fn partial_sum(seq: &[f64], t: usize) -> Result<f64> {
    if t == 0 || t > seq.len() {
        return Err(Error::Index { index: t, len: seq.len() });
    }
    Ok(seq[..t].iter().sum())
}

/// Running partial sums `S_1, …, S_n`.
pub fn partial_sums(seq: &[f64]) -> Vec<f64> {
    seq.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

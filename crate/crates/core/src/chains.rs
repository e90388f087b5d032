//! Finite-state strictly stationary Markov chains.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::rng_from_seed;

const ROW_SUM_INPUT_TOL: f64 = 1e-9;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;
const POWER_ITERATION_THRESHOLD: usize = 1000;

/// A row-stochastic transition matrix together with its stationary distribution.
///
/// Immutable after construction; sharing across threads is free.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
    // cumulative tables used by the sampler
    row_cdf: Vec<Vec<f64>>,
    stationary_cdf: Vec<f64>,
}

/// JSON layout of a chain: `{"n_states", "transition", "stationary"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDocument {
    pub n_states: usize,
    pub transition: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
}

impl ChainModel {
    fn from_parts(transition: DMatrix<f64>, stationary: DVector<f64>) -> Self {
        let row_cdf = (0..transition.nrows())
            .map(|i| cdf(transition.row(i).iter().copied()))
            .collect();
        let stationary_cdf = cdf(stationary.iter().copied());
        ChainModel { transition, stationary, row_cdf, stationary_cdf }
    }

    /// Builds a chain from an arbitrary transition matrix, solving for the
    /// stationary distribution.
    pub fn from_transition(transition: DMatrix<f64>) -> Result<Self> {
        let transition = normalized_rows(transition)?;
        let stationary = solve_stationary(&transition)?;
        Ok(Self::from_parts(transition, stationary))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_transition(matrix_from_rows(rows)?)
    }

    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// `‖ρP − ρ‖₁`.
    pub fn stationary_residual(&self) -> f64 {
        let moved = self.transition.tr_mul(&self.stationary);
        (moved - &self.stationary).abs().sum()
    }

    /// Stable identifier derived from the matrix bits.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the IEEE bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.transition.iter().chain(self.stationary.iter()) {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn to_document(&self) -> ChainDocument {
        let n = self.n_states();
        ChainDocument {
            n_states: n,
            transition: (0..n).map(|i| self.transition.row(i).iter().copied().collect()).collect(),
            stationary: self.stationary.iter().copied().collect(),
        }
    }

    /// Rebuilds a chain from its document without re-solving for ρ, so a
    /// serialize/deserialize cycle is bit-stable. The invariants are re-checked.
    pub fn from_document(doc: &ChainDocument) -> Result<Self> {
        if doc.transition.len() != doc.n_states || doc.stationary.len() != doc.n_states {
            return Err(Error::DimensionMismatch {
                expected: doc.n_states,
                got: doc.transition.len().min(doc.stationary.len()),
            });
        }
        let transition = matrix_from_rows(&doc.transition)?;
        for (i, row) in transition.row_iter().enumerate() {
            check_row(i, row.iter().copied(), 1e-12)?;
        }
        let stationary = DVector::from_vec(doc.stationary.clone());
        check_distribution(stationary.as_slice(), 1e-12)?;
        let chain = Self::from_parts(transition, stationary);
        let residual = chain.stationary_residual();
        if residual > STATIONARY_RESIDUAL_TOL {
            return Err(Error::Domain(format!("stationary residual {residual:e} exceeds tolerance")));
        }
        Ok(chain)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }

    fn draw_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.stationary_cdf, rng)
    }

    fn draw_next<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        draw(&self.row_cdf[from], rng)
    }
}

fn cdf(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // the last state with positive mass must absorb rounding
    if let Some(last_pos) = out.iter().rposition(|&c| c > 0.0) {
        let prev = if last_pos == 0 { 0.0 } else { out[last_pos - 1] };
        if out[last_pos] > prev {
            for c in &mut out[last_pos..] {
                *c = 1.0;
            }
        }
    }
    out
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(domain("transition matrix is empty"));
    }
    for row in rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_row(i: usize, row: impl Iterator<Item = f64>, tol: f64) -> Result<f64> {
    let mut sum = 0.0;
    for p in row {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NonStochastic(format!("entry {p} in row {i} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NonStochastic(format!("row {i} sums to {sum}")));
    }
    Ok(sum)
}

fn normalized_rows(mut p: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::NonStochastic(format!("matrix is {}x{}", p.nrows(), p.ncols())));
    }
    for i in 0..p.nrows() {
        let sum = check_row(i, p.row(i).iter().copied(), ROW_SUM_INPUT_TOL)?;
        p.row_mut(i).unscale_mut(sum);
    }
    Ok(p)
}

fn check_distribution(rho: &[f64], tol: f64) -> Result<f64> {
    if rho.is_empty() {
        return Err(domain("distribution is empty"));
    }
    let mut sum = 0.0;
    for &p in rho {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("probability {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(domain(format!("probabilities sum to {sum}")));
    }
    Ok(sum)
}

/// Validates a probability vector (entries in [0,1], sum 1 within 1e−9) and
/// renormalizes it.
pub fn validate_distribution(rho: &[f64]) -> Result<Vec<f64>> {
    let sum = check_distribution(rho, ROW_SUM_INPUT_TOL)?;
    Ok(rho.iter().map(|p| p / sum).collect())
}

/// Solves `ρP = ρ`, `Σρ = 1`.
///
/// Direct least-squares solve of the augmented system `[Pᵀ − I; 1ᵀ] ρ = e_{n+1}`;
/// a rank-deficient system means the stationary distribution is not unique.
/// Chains larger than 1000 states fall back to power iteration.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = normalized_rows(p.clone())?;
    solve_stationary(&p)
}

fn solve_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut rho = if n > POWER_ITERATION_THRESHOLD {
        power_iteration(p)?
    } else {
        let mut m = DMatrix::<f64>::zeros(n + 1, n);
        m.view_mut((0, 0), (n, n)).copy_from(&(p.transpose() - DMatrix::identity(n, n)));
        m.row_mut(n).fill(1.0);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        rhs[n] = 1.0;
        let svd = m.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-10 * smax.max(1.0) {
            return Err(Error::NoUniqueStationary);
        }
        svd.solve(&rhs, 0.0).map_err(|_| Error::NoUniqueStationary)?
    };
    if rho.iter().any(|&x| x < -1e-9) {
        return Err(Error::NoUniqueStationary);
    }
    rho.apply(|x| *x = x.max(0.0));
    let s = rho.sum();
    rho.unscale_mut(s);
    let residual = (p.tr_mul(&rho) - &rho).abs().sum();
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::NoUniqueStationary);
    }
    Ok(rho)
}

fn power_iteration(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    // lazy chain (P + I)/2 shares ρ and is aperiodic
    let mut rho = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..1_000_000 {
        let next = (p.tr_mul(&rho) + &rho) * 0.5;
        let delta = (&next - &rho).abs().sum();
        rho = next;
        if delta < 1e-14 {
            return Ok(rho);
        }
    }
    Err(Error::NoUniqueStationary)
}

/// Two-state chain `[[1−p, p], [q, 1−q]]`, stationary `(q, p)/(p+q)`.
pub fn build_two_state(p: f64, q: f64) -> Result<ChainModel> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(domain(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    let transition = DMatrix::from_row_slice(2, 2, &[1.0 - p, p, q, 1.0 - q]);
    let stationary = DVector::from_vec(vec![q / (p + q), p / (p + q)]);
    Ok(ChainModel::from_parts(transition, stationary))
}

/// Lazy random walk on an `n`-cycle: hold with probability `h`, otherwise step to
/// either neighbour with probability `(1−h)/2`. Doubly stochastic, so ρ is uniform.
pub fn build_cycle_walk(n: usize, h: f64) -> Result<ChainModel> {
    if n < 3 {
        return Err(domain(format!("cycle needs at least 3 states, got {n}")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(domain(format!("holding probability {h} must lie in (0, 1)")));
    }
    let side = (1.0 - h) / 2.0;
    let mut transition = DMatrix::zeros(n, n);
    for i in 0..n {
        transition[(i, i)] = h;
        transition[(i, (i + 1) % n)] = side;
        transition[(i, (i + n - 1) % n)] = side;
    }
    let stationary = DVector::from_element(n, 1.0 / n as f64);
    Ok(ChainModel::from_parts(transition, stationary))
}

/// Truncated renewal chain on `{0, …, M−1}`: from 0 jump to `j` with probability
/// `∝ (j+1)^{−(k+2)}`, then count down deterministically to 0. Heavy return-time
/// tails make β decay polynomially over horizons shorter than `M`. φ does not:
/// the start `M−1` carries positive mass and its `t`-step law is a point mass,
/// so φ stays close to 1 until `t ≥ M`.
pub fn build_renewal_tail(k: f64, m: usize) -> Result<ChainModel> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(domain(format!("tail exponent k = {k} must be positive")));
    }
    if m < 2 {
        return Err(domain(format!("truncation size M = {m} must be at least 2")));
    }
    let weights: Vec<f64> = (0..m).map(|j| ((j + 1) as f64).powf(-(k + 2.0))).collect();
    let total: f64 = weights.iter().sum();
    let mut transition = DMatrix::zeros(m, m);
    for (j, w) in weights.iter().enumerate() {
        transition[(0, j)] = w / total;
    }
    for i in 1..m {
        transition[(i, i - 1)] = 1.0;
    }
    ChainModel::from_transition(transition)
}

/// Chain whose every row equals `ρ`: consecutive samples are independent.
pub fn build_iid(rho: &[f64]) -> Result<ChainModel> {
    let rho = validate_distribution(rho)?;
    let n = rho.len();
    let transition = DMatrix::from_fn(n, n, |_, j| rho[j]);
    Ok(ChainModel::from_parts(transition, DVector::from_vec(rho)))
}

/// A stationary sample path `z_1, …, z_T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSample {
    pub states: Vec<usize>,
    pub seed: u64,
    pub chain_id: u64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `z_1 ~ ρ` and `z_{t+1} ~ P(z_t, ·)`. Pure in `(chain, len, seed)`.
pub fn sample_stationary_path(chain: &ChainModel, len: usize, seed: u64) -> Result<PathSample> {
    if len == 0 {
        return Err(domain("path length must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut states = Vec::with_capacity(len);
    let mut z = chain.draw_initial(&mut rng);
    states.push(z);
    for _ in 1..len {
        z = chain.draw_next(z, &mut rng);
        states.push(z);
    }
    Ok(PathSample { states, seed, chain_id: chain.fingerprint() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationary_of_symmetric_chain() {
        let p = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        let rho = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(rho[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rho[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn stationary_of_asymmetric_chain() {
        // ρ₀·0.1 = ρ₁·0.3 with ρ₀ + ρ₁ = 1
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let rho = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(rho[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(rho[1], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn identity_chain_is_reducible() {
        let p = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(stationary_distribution(&p), Err(Error::NoUniqueStationary)));
    }

    #[test]
    fn non_stochastic_inputs_rejected() {
        let neg = DMatrix::from_row_slice(2, 2, &[1.2, -0.2, 0.5, 0.5]);
        assert!(matches!(stationary_distribution(&neg), Err(Error::NonStochastic(_))));
        let short = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.5, 0.5]);
        assert!(matches!(stationary_distribution(&short), Err(Error::NonStochastic(_))));
    }

    #[test]
    fn periodic_chain_has_unique_stationary() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let rho = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(rho[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn power_iteration_matches_direct_solve() {
        let chain = build_renewal_tail(1.5, 30).unwrap();
        let direct = chain.stationary().clone();
        let iterated = power_iteration(chain.transition()).unwrap();
        assert!((direct - iterated).abs().max() < 1e-12);
    }

    #[test]
    fn two_state_constructor() {
        let c = build_two_state(0.25, 0.25).unwrap();
        assert_eq!(c.stationary().as_slice(), &[0.5, 0.5]);
        let c = build_two_state(0.1, 0.3).unwrap();
        assert_abs_diff_eq!(c.stationary()[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c.stationary()[1], 0.25, epsilon = 1e-15);
        assert!(matches!(build_two_state(0.0, 0.5), Err(Error::Domain(_))));
        assert!(build_two_state(0.5, 1.0).is_err());
    }

    #[test]
    fn cycle_walk_constructor() {
        let c = build_cycle_walk(4, 0.5).unwrap();
        assert!(c.stationary().iter().all(|&x| x == 0.25));
        let c = build_cycle_walk(3, 0.2).unwrap();
        for row in c.transition().row_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        assert!(build_cycle_walk(2, 0.5).is_err());
        assert!(build_cycle_walk(5, 1.0).is_err());
    }

    #[test]
    fn renewal_constructor() {
        let c = build_renewal_tail(1.0, 50).unwrap();
        assert_eq!(c.n_states(), 50);
        for row in c.transition().row_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        assert!(c.stationary_residual() <= 1e-10);
        assert!(build_renewal_tail(0.0, 50).is_err());
        assert!(build_renewal_tail(1.0, 1).is_err());
    }

    #[test]
    fn iid_constructor() {
        let c = build_iid(&[0.5, 0.5]).unwrap();
        assert_eq!(c.transition(), &DMatrix::from_element(2, 2, 0.5));
        let c = build_iid(&[1.0]).unwrap();
        assert_eq!(c.transition()[(0, 0)], 1.0);
        assert!(matches!(build_iid(&[0.3, 0.8]), Err(Error::Domain(_))));
    }

    #[test]
    fn sampler_skips_null_states() {
        let c = build_iid(&[0.0, 1.0, 0.0]).unwrap();
        let path = sample_stationary_path(&c, 1000, 3).unwrap();
        assert!(path.states.iter().all(|&z| z == 1));
    }

    #[test]
    fn zero_length_path_rejected() {
        let c = build_two_state(0.2, 0.2).unwrap();
        assert!(sample_stationary_path(&c, 0, 1).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c = build_renewal_tail(1.3, 17).unwrap();
        let back = ChainModel::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.fingerprint(), c.fingerprint());
    }
}

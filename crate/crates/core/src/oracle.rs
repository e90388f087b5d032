//! Per-state affine gradient oracles `∇V_z(w) = A(z)w + B(z)`.
//!
//! Two families are provided: generic quadratics on `R^d` with symmetric
//! positive-definite operators, and regularized least squares in the RKHS of a
//! Gaussian kernel over a finite grid, represented by expansion coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::rng_from_seed;

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e12;

/// The operations every gradient family supports.
pub trait GradientOracle {
    /// Length of the point representation.
    fn dim(&self) -> usize;
    fn n_states(&self) -> usize;
    /// `out ← A(z) x`.
    fn apply_operator(&self, z: usize, x: &DVector<f64>, out: &mut DVector<f64>);
    /// `B(z)`.
    fn offset(&self, z: usize) -> &DVector<f64>;
    /// Inner product of the underlying Hilbert space.
    fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64;
    /// `V_z(w)` with the constant term fixed at zero up to label terms.
    fn potential(&self, z: usize, w: &DVector<f64>) -> f64;

    fn check_point(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        Ok(())
    }

    fn check_state(&self, z: usize) -> Result<()> {
        if z >= self.n_states() {
            return Err(domain(format!("state {z} outside 0..{}", self.n_states())));
        }
        Ok(())
    }

    /// `A(z) w + B(z)`.
    fn gradient(&self, z: usize, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(z)?;
        self.check_point(w)?;
        let mut out = DVector::zeros(self.dim());
        self.apply_operator(z, w, &mut out);
        out += self.offset(z);
        Ok(out)
    }

    fn norm(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_point(v)?;
        let q = self.inner(v, v);
        if q < -1e-10 {
            return Err(Error::NegativeQuadraticForm(q));
        }
        Ok(q.max(0.0).sqrt())
    }
}

/// Quadratic potentials `V_z(w) = ½⟨A(z)w, w⟩ + ⟨B(z), w⟩` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFamily {
    operators: Vec<DMatrix<f64>>,
    offsets: Vec<DVector<f64>>,
}

impl QuadraticFamily {
    pub fn new(operators: Vec<DMatrix<f64>>, offsets: Vec<DVector<f64>>) -> Result<Self> {
        if operators.is_empty() {
            return Err(domain("family needs at least one state"));
        }
        if operators.len() != offsets.len() {
            return Err(Error::DimensionMismatch { expected: operators.len(), got: offsets.len() });
        }
        let d = operators[0].nrows();
        for (a, b) in operators.iter().zip(&offsets) {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
            }
            if b.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: b.len() });
            }
            if (a - a.transpose()).amax() > SYMMETRY_TOL {
                return Err(domain("operator is not symmetric"));
            }
            let lo = a.clone().symmetric_eigenvalues().min();
            if !(lo > 0.0) {
                return Err(domain(format!("operator has eigenvalue {lo} ≤ 0")));
            }
        }
        Ok(QuadraticFamily { operators, offsets })
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.operators
    }

    pub fn offsets(&self) -> &[DVector<f64>] {
        &self.offsets
    }
}

impl GradientOracle for QuadraticFamily {
    fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    fn n_states(&self) -> usize {
        self.operators.len()
    }

    fn apply_operator(&self, z: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.operators[z].mul_to(x, out);
    }

    fn offset(&self, z: usize) -> &DVector<f64> {
        &self.offsets[z]
    }

    fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(v)
    }

    fn potential(&self, z: usize, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.operators[z] * w)) + self.offsets[z].dot(w)
    }
}

/// One kernel state: a grid point index and its label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelState {
    pub point: usize,
    pub label: f64,
}

/// `V_z(f) = ½{(f(x_z) − y_z)² + λ‖f‖²_K}` over `f = Σ_j c_j K(x_j, ·)`.
///
/// In coefficients, `A(z)c = (Gc)_{x_z} e_{x_z} + λc` and `B(z) = −y_z e_{x_z}`;
/// the operator is self-adjoint in the Gram inner product `⟨c, c'⟩ = cᵀGc'`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    grid: Vec<f64>,
    bandwidth: f64,
    lambda: f64,
    gram: DMatrix<f64>,
    states: Vec<KernelState>,
    offsets: Vec<DVector<f64>>,
}

pub fn gaussian_kernel(x: f64, y: f64, bandwidth: f64) -> f64 {
    (-(x - y).powi(2) / (2.0 * bandwidth * bandwidth)).exp()
}

impl KernelFamily {
    pub fn new(grid: Vec<f64>, bandwidth: f64, lambda: f64, states: Vec<KernelState>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(domain("kernel grid needs at least 2 points"));
        }
        if !(bandwidth > 0.0) || !(lambda > 0.0) {
            return Err(domain("bandwidth and lambda must be positive"));
        }
        if states.is_empty() || states.iter().any(|s| s.point >= grid.len()) {
            return Err(domain("kernel states must reference grid points"));
        }
        let m = grid.len();
        let gram = DMatrix::from_fn(m, m, |i, j| gaussian_kernel(grid[i], grid[j], bandwidth));
        let offsets = states
            .iter()
            .map(|s| {
                let mut b = DVector::zeros(m);
                b[s.point] = -s.label;
                b
            })
            .collect();
        Ok(KernelFamily { grid, bandwidth, lambda, gram, states, offsets })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn states(&self) -> &[KernelState] {
        &self.states
    }

    /// `f(x_j) = (Gc)_j`.
    pub fn evaluate_at(&self, c: &DVector<f64>, point: usize) -> f64 {
        self.gram.row(point).transpose().dot(c)
    }
}

impl GradientOracle for KernelFamily {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn n_states(&self) -> usize {
        self.states.len()
    }

    fn apply_operator(&self, z: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        let i = self.states[z].point;
        let fx = self.evaluate_at(x, i);
        out.copy_from(x);
        *out *= self.lambda;
        out[i] += fx;
    }

    fn offset(&self, z: usize) -> &DVector<f64> {
        &self.offsets[z]
    }

    fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * v))
    }

    fn potential(&self, z: usize, c: &DVector<f64>) -> f64 {
        let s = self.states[z];
        let resid = self.evaluate_at(c, s.point) - s.label;
        0.5 * (resid * resid + self.lambda * self.inner(c, c))
    }
}

/// Either family; the type used by configuration files and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Quadratic(QuadraticFamily),
    Kernel(KernelFamily),
}

impl GradientOracle for Family {
    fn dim(&self) -> usize {
        match self {
            Family::Quadratic(f) => f.dim(),
            Family::Kernel(f) => f.dim(),
        }
    }

    fn n_states(&self) -> usize {
        match self {
            Family::Quadratic(f) => f.n_states(),
            Family::Kernel(f) => f.n_states(),
        }
    }

    fn apply_operator(&self, z: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Family::Quadratic(f) => f.apply_operator(z, x, out),
            Family::Kernel(f) => f.apply_operator(z, x, out),
        }
    }

    fn offset(&self, z: usize) -> &DVector<f64> {
        match self {
            Family::Quadratic(f) => f.offset(z),
            Family::Kernel(f) => f.offset(z),
        }
    }

    fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match self {
            Family::Quadratic(f) => f.inner(u, v),
            Family::Kernel(f) => f.inner(u, v),
        }
    }

    fn potential(&self, z: usize, w: &DVector<f64>) -> f64 {
        match self {
            Family::Quadratic(f) => f.potential(z, w),
            Family::Kernel(f) => f.potential(z, w),
        }
    }
}

impl Family {
    pub fn minimizer(&self, rho: &[f64]) -> Result<DVector<f64>> {
        match self {
            Family::Quadratic(f) => minimizer(f, rho),
            Family::Kernel(f) => kernel_minimizer(f, rho),
        }
    }

    pub fn certify(&self, rho: &[f64]) -> Result<AssumptionCertificate> {
        match self {
            Family::Quadratic(f) => certify(f, rho),
            Family::Kernel(f) => certify_kernel(f, rho),
        }
    }
}

fn check_weights(n_states: usize, rho: &[f64]) -> Result<()> {
    if rho.len() != n_states {
        return Err(Error::DimensionMismatch { expected: n_states, got: rho.len() });
    }
    crate::chains::validate_distribution(rho).map(|_| ())
}

/// Solves `Âw + B̂ = 0` with `Â = Σ ρ(z)A(z)`, `B̂ = Σ ρ(z)B(z)`.
pub fn minimizer(family: &QuadraticFamily, rho: &[f64]) -> Result<DVector<f64>> {
    check_weights(family.n_states(), rho)?;
    let d = family.dim();
    let mut a_bar = DMatrix::zeros(d, d);
    let mut b_bar = DVector::zeros(d);
    for (z, &p) in rho.iter().enumerate() {
        a_bar += &family.operators[z] * p;
        b_bar += &family.offsets[z] * p;
    }
    let eig = SymmetricEigen::new(a_bar.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(Error::SingularSystem(cond));
    }
    solve_refined(&a_bar, &(-b_bar), cond)
}

/// Minimizer of `½ Σ ρ(z)[(f(x_z) − y_z)² + λ‖f‖²_K]`, from the coefficient
/// equations `Σ_z ρ(z)((Gc)_{x_z} − y_z)e_{x_z} + λc = 0`.
pub fn kernel_minimizer(family: &KernelFamily, rho: &[f64]) -> Result<DVector<f64>> {
    check_weights(family.n_states(), rho)?;
    let m = family.dim();
    let mut mass = DVector::<f64>::zeros(m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (s, &p) in family.states.iter().zip(rho) {
        mass[s.point] += p;
        rhs[s.point] += p * s.label;
    }
    let mut system = DMatrix::from_fn(m, m, |i, j| mass[i] * family.gram[(i, j)]);
    for i in 0..m {
        system[(i, i)] += family.lambda;
    }
    let sv = system.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularSystem(cond));
    }
    solve_refined(&system, &rhs, cond)
}

fn solve_refined(a: &DMatrix<f64>, rhs: &DVector<f64>, cond: f64) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs).ok_or(Error::SingularSystem(cond))?;
    // one round of iterative refinement
    let r = rhs - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Measured constants of the gradient assumptions for a `(family, ρ)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCertificate {
    /// `max_z ‖∇V_z(w*)‖²` over states with `ρ(z) > 0`.
    pub sigma2: f64,
    pub kappa: f64,
    pub eta: f64,
    pub alpha: f64,
    /// `‖Σ ρ(z) ∇V_z(w*)‖`, zero up to rounding.
    pub mean_gradient_norm: f64,
}

fn noise_at_optimum<F: GradientOracle>(family: &F, rho: &[f64], w_star: &DVector<f64>) -> Result<(f64, f64)> {
    let mut sigma2: f64 = 0.0;
    let mut mean = DVector::zeros(family.dim());
    for (z, &p) in rho.iter().enumerate() {
        let g = family.gradient(z, w_star)?;
        if p > 0.0 {
            sigma2 = sigma2.max(family.inner(&g, &g));
        }
        mean += g * p;
    }
    Ok((sigma2, family.norm(&mean)?))
}

pub fn certify(family: &QuadraticFamily, rho: &[f64]) -> Result<AssumptionCertificate> {
    let w_star = minimizer(family, rho)?;
    let (sigma2, mean_gradient_norm) = noise_at_optimum(family, rho, &w_star)?;
    let (mut kappa, mut eta) = (f64::INFINITY, 0.0f64);
    for a in &family.operators {
        let ev = a.clone().symmetric_eigenvalues();
        kappa = kappa.min(ev.min());
        eta = eta.max(ev.max());
    }
    Ok(AssumptionCertificate { sigma2, kappa, eta, alpha: kappa / eta, mean_gradient_norm })
}

/// Each `A(z) = K_x ⊗ K_x + λI` has spectrum `{λ, K(x,x) + λ}`, so `κ = λ` and
/// `η = max_x K(x,x) + λ`.
pub fn certify_kernel(family: &KernelFamily, rho: &[f64]) -> Result<AssumptionCertificate> {
    let w_star = kernel_minimizer(family, rho)?;
    let (sigma2, mean_gradient_norm) = noise_at_optimum(family, rho, &w_star)?;
    let kappa = family.lambda;
    let max_diag = family.states.iter().map(|s| family.gram[(s.point, s.point)]).fold(0.0, f64::max);
    let eta = max_diag + family.lambda;
    Ok(AssumptionCertificate { sigma2, kappa, eta, alpha: kappa / eta, mean_gradient_norm })
}

fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes Q Haar-distributed
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random family with spectra inside `[kappa, eta]`; the smallest eigenvalue of
/// the first state is `kappa` and the largest of the last state is `eta`, so the
/// certificate reproduces both targets.
pub fn build_random_quadratic(
    d: usize,
    n_states: usize,
    kappa: f64,
    eta: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<QuadraticFamily> {
    if d == 0 || n_states == 0 {
        return Err(domain("dimension and state count must be positive"));
    }
    if !(kappa > 0.0 && kappa <= eta && eta.is_finite()) {
        return Err(domain(format!("need 0 < kappa ≤ eta, got {kappa}, {eta}")));
    }
    if d * n_states < 2 && kappa != eta {
        return Err(domain("a single scalar state cannot realize kappa < eta"));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(domain("noise_scale must be finite and nonnegative"));
    }
    let mut rng = rng_from_seed(seed);
    let slots = d * n_states;
    let mut operators = Vec::with_capacity(n_states);
    let mut offsets = Vec::with_capacity(n_states);
    for z in 0..n_states {
        let eig: Vec<f64> = (0..d)
            .map(|i| {
                let slot = z * d + i;
                let u: f64 = rng.random();
                if slot == 0 {
                    kappa
                } else if slot == slots - 1 {
                    eta
                } else {
                    kappa + (eta - kappa) * u
                }
            })
            .collect();
        let q = random_orthogonal(d, &mut rng);
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = DVector::from_fn(d, |_, _| noise_scale * rng.sample::<f64, _>(StandardNormal));
        operators.push(a);
        offsets.push(b);
    }
    QuadraticFamily::new(operators, offsets)
}

/// How labels are assigned to kernel grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelRule {
    /// `y = sin(2πx) + ε` with centered uniform noise of the given amplitude.
    Sine { noise: f64 },
    Zero,
    Constant { value: f64 },
}

/// Gaussian-kernel family on a uniform grid of `m` points in `[0, 1]`, one state
/// per grid point.
pub fn build_kernel_family(m: usize, bandwidth: f64, lambda: f64, rule: LabelRule, seed: u64) -> Result<KernelFamily> {
    if m < 2 {
        return Err(domain("kernel grid needs at least 2 points"));
    }
    let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let labels: Vec<f64> = match rule {
        LabelRule::Zero => vec![0.0; m],
        LabelRule::Constant { value } => vec![value; m],
        LabelRule::Sine { noise } => {
            let mut rng = rng_from_seed(seed);
            let eps: Vec<f64> = (0..m).map(|_| noise * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let mean = eps.iter().sum::<f64>() / m as f64;
            grid.iter()
                .zip(&eps)
                .map(|(x, e)| (2.0 * std::f64::consts::PI * x).sin() + e - mean)
                .collect()
        }
    };
    let states = labels.iter().enumerate().map(|(point, &label)| KernelState { point, label }).collect();
    KernelFamily::new(grid, bandwidth, lambda, states)
}

/// JSON layout of a family. Matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyDocument {
    Quadratic {
        dimension: usize,
        operators: Vec<Vec<Vec<f64>>>,
        offsets: Vec<Vec<f64>>,
    },
    Kernel {
        grid: Vec<f64>,
        bandwidth: f64,
        lambda: f64,
        states: Vec<KernelState>,
    },
}

impl Family {
    pub fn to_document(&self) -> FamilyDocument {
        match self {
            Family::Quadratic(f) => FamilyDocument::Quadratic {
                dimension: f.dim(),
                operators: f
                    .operators
                    .iter()
                    .map(|a| a.row_iter().map(|r| r.iter().copied().collect()).collect())
                    .collect(),
                offsets: f.offsets.iter().map(|b| b.iter().copied().collect()).collect(),
            },
            Family::Kernel(f) => FamilyDocument::Kernel {
                grid: f.grid.clone(),
                bandwidth: f.bandwidth,
                lambda: f.lambda,
                states: f.states.clone(),
            },
        }
    }

    pub fn from_document(doc: FamilyDocument) -> Result<Self> {
        match doc {
            FamilyDocument::Quadratic { dimension, operators, offsets } => {
                let ops = operators
                    .iter()
                    .map(|rows| {
                        if rows.len() != dimension || rows.iter().any(|r| r.len() != dimension) {
                            return Err(Error::DimensionMismatch { expected: dimension, got: rows.len() });
                        }
                        Ok(DMatrix::from_fn(dimension, dimension, |i, j| rows[i][j]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let offs = offsets.into_iter().map(DVector::from_vec).collect();
                Ok(Family::Quadratic(QuadraticFamily::new(ops, offs)?))
            }
            FamilyDocument::Kernel { grid, bandwidth, lambda, states } => {
                Ok(Family::Kernel(KernelFamily::new(grid, bandwidth, lambda, states)?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

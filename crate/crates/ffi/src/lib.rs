//! C ABI over `ssmgd-core`.
//!
//! Conventions:
//! * every function returns an [`SsmgdStatus`]; results come back through out
//!   pointers, which are left untouched on failure;
//! * chains and families are opaque handles created by `ssmgd_*_new*` style
//!   constructors and released with the matching `*_free`;
//! * arrays are passed as pointer + length, matrices row-major;
//! * after a failure, [`ssmgd_last_error_message`] describes it (per thread).

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::{DMatrix, DVector};
use ssmgd_core::bounds::{self, SampleBoundInputs, Variant};
use ssmgd_core::chains::{self, ChainModel};
use ssmgd_core::mixing::{self, ExponentialEnvelope};
use ssmgd_core::oracle::{self, Family, LabelRule};
use ssmgd_core::ssmgd::{run_decomposed, Problem, Schedule};
use ssmgd_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmgdStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    NonStochastic = 3,
    NoUniqueStationary = 4,
    Fit = 5,
    DimensionMismatch = 6,
    Singular = 7,
    NonFinite = 8,
    Config = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Bound variant selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmgdVariant {
    Paper = 0,
    Conservative = 1,
}

impl From<SsmgdVariant> for Variant {
    fn from(v: SsmgdVariant) -> Self {
        match v {
            SsmgdVariant::Paper => Variant::Paper,
            SsmgdVariant::Conservative => Variant::Conservative,
        }
    }
}

/// Opaque finite-state chain.
pub struct SsmgdChain(ChainModel);

/// Opaque gradient family.
pub struct SsmgdFamily(Family);

/// Assumption constants of a family under a stationary law.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsmgdCertificate {
    pub sigma2: f64,
    pub kappa: f64,
    pub eta: f64,
    pub alpha: f64,
}

/// Constants shared by the sampling-error bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsmgdBoundInputs {
    pub theta: f64,
    pub alpha: f64,
    pub sigma2: f64,
    pub eta: f64,
    pub delta: f64,
}

impl From<SsmgdBoundInputs> for SampleBoundInputs {
    fn from(b: SsmgdBoundInputs) -> Self {
        SampleBoundInputs { theta: b.theta, alpha: b.alpha, sigma2: b.sigma2, eta: b.eta, delta: b.delta }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SsmgdStatus {
    match e {
        Error::NonStochastic(_) => SsmgdStatus::NonStochastic,
        Error::NoUniqueStationary => SsmgdStatus::NoUniqueStationary,
        Error::Domain(_) | Error::Index { .. } | Error::NegativeQuadraticForm(_) => SsmgdStatus::Domain,
        Error::Fit(_) => SsmgdStatus::Fit,
        Error::DimensionMismatch { .. } => SsmgdStatus::DimensionMismatch,
        Error::SingularSystem(_) => SsmgdStatus::Singular,
        Error::NonFinite { .. } => SsmgdStatus::NonFinite,
        Error::Config(_) | Error::Json(_) | Error::Csv(_) => SsmgdStatus::Config,
        Error::Io(_) => SsmgdStatus::Io,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Buffer { need: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult = Result<(), Failure>;

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> FfiResult) -> SsmgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SsmgdStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SsmgdStatus::NullPointer
        }
        Ok(Err(Failure::Buffer { need, got })) => {
            set_error(format!("buffer holds {got} values, {need} required"));
            SsmgdStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            SsmgdStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, need: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    if len < need {
        return Err(Failure::Buffer { need, got: len });
    }
    Ok(slice::from_raw_parts_mut(ptr, need))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &'static str) -> FfiResult {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    ptr.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

fn boxed_chain(out: *mut *mut SsmgdChain, chain: Result<ChainModel, Error>) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    let ptr = Box::into_raw(Box::new(SsmgdChain(chain?)));
    unsafe { out.write(ptr) };
    Ok(())
}

/// Two-state chain `[[1−p, p], [q, 1−q]]`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_two_state(p: f64, q: f64, out: *mut *mut SsmgdChain) -> SsmgdStatus {
    guard(|| boxed_chain(out, chains::build_two_state(p, q)))
}

/// Lazy walk on an `n`-cycle with holding probability `h`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_cycle_walk(n: usize, h: f64, out: *mut *mut SsmgdChain) -> SsmgdStatus {
    guard(|| boxed_chain(out, chains::build_cycle_walk(n, h)))
}

/// Truncated renewal chain with tail exponent `k` on `m` states.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_renewal_tail(k: f64, m: usize, out: *mut *mut SsmgdChain) -> SsmgdStatus {
    guard(|| boxed_chain(out, chains::build_renewal_tail(k, m)))
}

/// Chain with independent draws from `rho[0..n]`.
///
/// # Safety
/// `rho` must be valid for `n` reads and `out` for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_iid(rho: *const f64, n: usize, out: *mut *mut SsmgdChain) -> SsmgdStatus {
    guard(|| {
        let rho = input(rho, n, "rho")?;
        boxed_chain(out, chains::build_iid(rho))
    })
}

/// Chain from a row-major `n × n` transition matrix.
///
/// # Safety
/// `transition` must be valid for `n * n` reads and `out` for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_from_matrix(
    transition: *const f64,
    n: usize,
    out: *mut *mut SsmgdChain,
) -> SsmgdStatus {
    guard(|| {
        let data = input(transition, n * n, "transition")?;
        boxed_chain(out, ChainModel::from_transition(DMatrix::from_row_slice(n, n, data)))
    })
}

/// Releases a chain. Null is ignored.
///
/// # Safety
/// `chain` must come from a chain constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_free(chain: *mut SsmgdChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// # Safety
/// `chain` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_n_states(chain: *const SsmgdChain, out: *mut usize) -> SsmgdStatus {
    guard(|| write(out, handle(chain, "chain")?.0.n_states(), "out"))
}

/// Writes the stationary distribution into `out[0..n_states]`.
///
/// # Safety
/// `chain` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_chain_stationary(chain: *const SsmgdChain, out: *mut f64, len: usize) -> SsmgdStatus {
    guard(|| {
        let c = &handle(chain, "chain")?.0;
        output(out, len, c.n_states(), "out")?.copy_from_slice(c.stationary().as_slice());
        Ok(())
    })
}

/// φ_t and β_t for `t = 1..=horizon`, written to `phi[t−1]` and `beta[t−1]`.
/// Either output may be null to skip it.
///
/// # Safety
/// `chain` must be a live handle; non-null outputs must hold `horizon` values.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_mixing_profile(
    chain: *const SsmgdChain,
    horizon: usize,
    phi: *mut f64,
    beta: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        let prof = mixing::mixing_profile(&handle(chain, "chain")?.0, horizon)?;
        if !phi.is_null() {
            output(phi, horizon, horizon, "phi")?.copy_from_slice(&prof.phi);
        }
        if !beta.is_null() {
            output(beta, horizon, horizon, "beta")?.copy_from_slice(&prof.beta);
        }
        Ok(())
    })
}

/// Majorizing `D r^t` envelope of `seq[0..len]` (index `t − 1` holds time `t`).
/// The all-zero sequence yields `D = r = 0`.
///
/// # Safety
/// `seq` must be valid for `len` reads; `d` and `r` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_fit_exponential_envelope(
    seq: *const f64,
    len: usize,
    d: *mut f64,
    r: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        if d.is_null() || r.is_null() {
            return Err(Failure::Null("d/r"));
        }
        let env = mixing::fit_exponential_envelope(input(seq, len, "seq")?)?;
        write(d, env.d, "d")?;
        write(r, env.r, "r")
    })
}

fn boxed_family(out: *mut *mut SsmgdFamily, family: Family) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    unsafe { out.write(Box::into_raw(Box::new(SsmgdFamily(family)))) };
    Ok(())
}

/// Random quadratic family with spectra in `[kappa, eta]`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_family_random_quadratic(
    dim: usize,
    n_states: usize,
    kappa: f64,
    eta: f64,
    noise_scale: f64,
    seed: u64,
    out: *mut *mut SsmgdFamily,
) -> SsmgdStatus {
    guard(|| {
        let f = oracle::build_random_quadratic(dim, n_states, kappa, eta, noise_scale, seed)?;
        boxed_family(out, Family::Quadratic(f))
    })
}

/// Gaussian-kernel least squares on `m` grid points with `sin(2πx)` labels plus
/// uniform noise of amplitude `noise`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_family_kernel(
    m: usize,
    bandwidth: f64,
    lambda: f64,
    noise: f64,
    seed: u64,
    out: *mut *mut SsmgdFamily,
) -> SsmgdStatus {
    guard(|| {
        let f = oracle::build_kernel_family(m, bandwidth, lambda, LabelRule::Sine { noise }, seed)?;
        boxed_family(out, Family::Kernel(f))
    })
}

/// Releases a family. Null is ignored.
///
/// # Safety
/// `family` must come from a family constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_family_free(family: *mut SsmgdFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Length of the point representation.
///
/// # Safety
/// `family` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_family_dim(family: *const SsmgdFamily, out: *mut usize) -> SsmgdStatus {
    use oracle::GradientOracle;
    guard(|| write(out, handle(family, "family")?.0.dim(), "out"))
}

fn weights(family: &Family, chain: &ChainModel) -> Result<Vec<f64>, Failure> {
    use oracle::GradientOracle;
    if family.n_states() != chain.n_states() {
        return Err(Error::DimensionMismatch { expected: family.n_states(), got: chain.n_states() }.into());
    }
    Ok(chain.stationary().iter().copied().collect())
}

/// Certificate of `family` under the stationary law of `chain`.
///
/// # Safety
/// Handles must be live and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_certify(
    family: *const SsmgdFamily,
    chain: *const SsmgdChain,
    out: *mut SsmgdCertificate,
) -> SsmgdStatus {
    guard(|| {
        let f = &handle(family, "family")?.0;
        let c = handle(chain, "chain")?;
        let cert = f.certify(&weights(f, &c.0)?)?;
        write(out, SsmgdCertificate { sigma2: cert.sigma2, kappa: cert.kappa, eta: cert.eta, alpha: cert.alpha }, "out")
    })
}

/// Minimizer `w*` of the stationary risk, written to `out[0..dim]`.
///
/// # Safety
/// Handles must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_minimizer(
    family: *const SsmgdFamily,
    chain: *const SsmgdChain,
    out: *mut f64,
    len: usize,
) -> SsmgdStatus {
    guard(|| {
        let f = &handle(family, "family")?.0;
        let ws = f.minimizer(&weights(f, &handle(chain, "chain")?.0)?)?;
        output(out, len, ws.len(), "out")?.copy_from_slice(ws.as_slice());
        Ok(())
    })
}

/// One decomposed run on a stationary path drawn with `path_seed`, step sizes
/// `1/(η t^θ)` with η from the certificate. For each of the `n_checkpoints`
/// strictly increasing times, writes `‖w_t − w*‖`, `‖u_t‖` and `‖v_t‖`; any
/// output may be null to skip it.
///
/// # Safety
/// Handles must be live; `w1` valid for `dim` reads, `checkpoints` for
/// `n_checkpoints` reads, non-null outputs for `n_checkpoints` writes.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_run_decomposed(
    family: *const SsmgdFamily,
    chain: *const SsmgdChain,
    theta: f64,
    path_seed: u64,
    w1: *const f64,
    dim: usize,
    checkpoints: *const usize,
    n_checkpoints: usize,
    total_err: *mut f64,
    init_err: *mut f64,
    samp_err: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        let f = &handle(family, "family")?.0;
        let c = &handle(chain, "chain")?.0;
        let rho = weights(f, c)?;
        let w1 = DVector::from_column_slice(input(w1, dim, "w1")?);
        let cps = input(checkpoints, n_checkpoints, "checkpoints")?;
        let last = *cps.last().ok_or(Error::Domain("at least one checkpoint is required".into()))?;
        let cert = f.certify(&rho)?;
        let problem = Problem::new(f.clone(), f.minimizer(&rho)?)?;
        let path = chains::sample_stationary_path(c, last, path_seed)?;
        let traj = run_decomposed(&problem, &path, &Schedule::new(theta, cert.eta)?, &w1, cps)?;
        let pairs = [
            (total_err, Some(&traj.total_err)),
            (init_err, traj.init_err.as_ref()),
            (samp_err, traj.samp_err.as_ref()),
        ];
        for (ptr, values) in pairs {
            if let (false, Some(v)) = (ptr.is_null(), values) {
                output(ptr, n_checkpoints, v.len(), "error output")?.copy_from_slice(v);
            }
        }
        Ok(())
    })
}

/// The constant `C_θ`, θ ∈ (½, 1).
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_c_theta(theta: f64, out: *mut f64) -> SsmgdStatus {
    guard(|| write(out, bounds::c_theta(theta)?, "out"))
}

/// Deterministic bound on `‖u_t‖`.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_init_bound(
    t: usize,
    theta: f64,
    alpha: f64,
    r1_norm: f64,
    variant: SsmgdVariant,
    out: *mut f64,
) -> SsmgdStatus {
    guard(|| write(out, bounds::init_bound(t, theta, alpha, r1_norm, variant.into())?, "out"))
}

/// Bound on `‖v_t‖²` under `φ_t ≤ D r^t` (θ < 1).
///
/// # Safety
/// `inputs` must be valid for reading and `out` for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_samp_bound_exp_phi(
    t: usize,
    inputs: *const SsmgdBoundInputs,
    d: f64,
    r: f64,
    out: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        let inp: SampleBoundInputs = (*handle(inputs, "inputs")?).into();
        write(out, bounds::samp_bound_exp_phi(t, &inp, &ExponentialEnvelope { d, r })?, "out")
    })
}

/// Bound on `‖v_t‖²` for θ = 1 and α < ½.
///
/// # Safety
/// `inputs` must be valid for reading and `out` for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_samp_bound_theta1(
    t: usize,
    inputs: *const SsmgdBoundInputs,
    d: f64,
    r: f64,
    out: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        let inp: SampleBoundInputs = (*handle(inputs, "inputs")?).into();
        write(out, bounds::samp_bound_theta1(t, &inp, &ExponentialEnvelope { d, r })?, "out")
    })
}

/// Bound on `‖v_t‖²` from the exact partial sum `S_t = Σ_{i≤t} φ_i`.
///
/// # Safety
/// `inputs` must be valid for reading and `out` for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_samp_bound_generic(
    t: usize,
    inputs: *const SsmgdBoundInputs,
    partial_sum: f64,
    out: *mut f64,
) -> SsmgdStatus {
    guard(|| {
        let inp: SampleBoundInputs = (*handle(inputs, "inputs")?).into();
        write(out, bounds::samp_bound_generic(t, &inp, partial_sum)?, "out")
    })
}

/// Rate exponent under `φ_t ~ t^{−k}`; `log_factor` is set when a
/// `(log t)^{1/2}` factor applies.
///
/// # Safety
/// Outputs must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ssmgd_poly_rate_exponent(
    theta: f64,
    k: f64,
    exponent: *mut f64,
    log_factor: *mut bool,
) -> SsmgdStatus {
    guard(|| {
        if exponent.is_null() || log_factor.is_null() {
            return Err(Failure::Null("exponent/log_factor"));
        }
        let (e, l) = bounds::poly_rate_exponent(theta, k)?;
        write(exponent, e, "exponent")?;
        write(log_factor, l, "log_factor")
    })
}

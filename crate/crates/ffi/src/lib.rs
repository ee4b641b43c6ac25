//! C interface to `coolchain`.
//!
//! Objects are opaque handles created by `cc_*_new` and released by the
//! matching `cc_*_free`. Every fallible call returns a `CcStatus`; on failure
//! the message is available from `cc_last_error_message` on the same thread.
//! Results are written through caller-provided out-pointers. Panics never
//! cross the boundary; they are reported as `CC_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coolchain::cooling_dynamics::{
    cooling_rate, ld_steady, steady_energy, CoolingParams, EmissionPattern, EnergyDistribution, ErgodicOperator,
    ErgodicOptions, ANGULAR_NODES,
};
use coolchain::ergodic_kernel::{kernel_moments, KernelParams, DEFAULT_NODES};
use coolchain::franck_condon::fc_single_prob;
use coolchain::ion_chain::{ChainConfig, IonChain};
use coolchain::quadrature::GaussLegendre;
use coolchain::spectrum::EnergyGrid;
use coolchain::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NoConvergence = 3,
    NotEquilibrium = 4,
    NotCrystallized = 5,
    DimensionMismatch = 6,
    BudgetExceeded = 7,
    TruncationInsufficient = 8,
    EmptyShell = 9,
    NoAxialCooling = 10,
    NoSteadyState = 11,
    HeatingRegime = 12,
    UnnormalizedPattern = 13,
    CflViolation = 14,
    NegativeDensity = 15,
    Io = 16,
    BufferTooSmall = 17,
    Panic = 18,
}

impl From<&Error> for CcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => CcStatus::InvalidParameter,
            Error::NoConvergence { .. } => CcStatus::NoConvergence,
            Error::NotEquilibrium { .. } => CcStatus::NotEquilibrium,
            Error::NotCrystallized { .. } => CcStatus::NotCrystallized,
            Error::DimensionMismatch { .. } => CcStatus::DimensionMismatch,
            Error::BudgetExceeded { .. } => CcStatus::BudgetExceeded,
            Error::TruncationInsufficient { .. } => CcStatus::TruncationInsufficient,
            Error::EmptyShell { .. } => CcStatus::EmptyShell,
            Error::NoAxialCooling => CcStatus::NoAxialCooling,
            Error::NoSteadyState => CcStatus::NoSteadyState,
            Error::HeatingRegime { .. } => CcStatus::HeatingRegime,
            Error::UnnormalizedPattern { .. } => CcStatus::UnnormalizedPattern,
            Error::CflViolation { .. } => CcStatus::CflViolation,
            Error::NegativeDensity { .. } => CcStatus::NegativeDensity,
            Error::Io(_) => CcStatus::Io,
        }
    }
}

/// Equilibrium positions and normal modes of a chain.
pub struct CcChain {
    inner: IonChain,
}

/// Laser, recoil and emission parameters.
pub struct CcCoolingParams {
    inner: CoolingParams,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(CcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CcStatus::from(&e), format!("{}: {}", e.code(), e))
    }
}

fn null(what: &str) -> Failure {
    Failure(CcStatus::NullPointer, format!("null_pointer: `{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CcStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn fill(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < values.len() {
        return Err(Failure(
            CcStatus::BufferTooSmall,
            format!("buffer_too_small: need {} values, got {len}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn chain_ref<'a>(chain: *const CcChain) -> Result<&'a IonChain, Failure> {
    chain.as_ref().map(|c| &c.inner).ok_or_else(|| null("chain"))
}

unsafe fn params_ref<'a>(params: *const CcCoolingParams) -> Result<&'a CoolingParams, Failure> {
    params.as_ref().map(|p| &p.inner).ok_or_else(|| null("params"))
}

unsafe fn params_mut<'a>(params: *mut CcCoolingParams) -> Result<&'a mut CoolingParams, Failure> {
    params.as_mut().map(|p| &mut p.inner).ok_or_else(|| null("params"))
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length excluding NUL.
#[no_mangle]
pub unsafe extern "C" fn cc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Solves the chain of `n_ions` ions with recoil frequency `recoil`.
#[no_mangle]
pub unsafe extern "C" fn cc_chain_new(n_ions: usize, recoil: f64, out: *mut *mut CcChain) -> CcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = IonChain::solve(ChainConfig::new(n_ions, recoil)?)?;
        out.write(Box::into_raw(Box::new(CcChain { inner })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_chain_free(chain: *mut CcChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cc_chain_n_modes(chain: *const CcChain, out: *mut usize) -> CcStatus {
    guard(|| write(out, chain_ref(chain)?.spectrum.n_modes(), "out"))
}

/// Mode frequencies in ascending order; `len` must be at least the mode count.
#[no_mangle]
pub unsafe extern "C" fn cc_chain_frequencies(chain: *const CcChain, out: *mut f64, len: usize) -> CcStatus {
    guard(|| fill(out, len, chain_ref(chain)?.spectrum.frequencies()))
}

/// Equilibrium positions in units of the Coulomb length.
#[no_mangle]
pub unsafe extern "C" fn cc_chain_positions(chain: *const CcChain, out: *mut f64, len: usize) -> CcStatus {
    guard(|| fill(out, len, chain_ref(chain)?.positions.as_slice()))
}

/// Lamb-Dicke parameters, row-major `[ion][mode]`.
#[no_mangle]
pub unsafe extern "C" fn cc_chain_lamb_dicke(
    chain: *const CcChain,
    cos_theta0: f64,
    out: *mut f64,
    len: usize,
) -> CcStatus {
    guard(|| {
        let chain = chain_ref(chain)?;
        let eta = chain.lamb_dicke(cos_theta0)?;
        let n = eta.n_ions();
        let values: Vec<f64> = (0..n).flat_map(|j| eta.row(j)).collect();
        fill(out, len, &values)
    })
}

/// Parameters at the optimal detuning `-gamma/2`, axial laser, isotropic
/// emission and all ions driven.
#[no_mangle]
pub unsafe extern "C" fn cc_params_new(
    n_ions: usize,
    gamma: f64,
    rabi: f64,
    recoil: f64,
    out: *mut *mut CcCoolingParams,
) -> CcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = CoolingParams::new(n_ions, gamma, rabi, recoil);
        inner.validate()?;
        out.write(Box::into_raw(Box::new(CcCoolingParams { inner })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_params_free(params: *mut CcCoolingParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Applies `edit` and rolls back if the result does not validate.
unsafe fn edit_params(params: *mut CcCoolingParams, edit: impl FnOnce(&mut CoolingParams)) -> CcStatus {
    guard(|| {
        let p = params_mut(params)?;
        let mut next = p.clone();
        edit(&mut next);
        next.validate()?;
        *p = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cc_params_set_detuning(params: *mut CcCoolingParams, detuning: f64) -> CcStatus {
    edit_params(params, |p| p.detuning = detuning)
}

#[no_mangle]
pub unsafe extern "C" fn cc_params_set_cos_theta0(params: *mut CcCoolingParams, cos_theta0: f64) -> CcStatus {
    edit_params(params, |p| p.cos_theta0 = cos_theta0)
}

#[no_mangle]
pub unsafe extern "C" fn cc_params_set_m_driven(params: *mut CcCoolingParams, m_driven: usize) -> CcStatus {
    edit_params(params, |p| p.m_driven = m_driven)
}

/// `name` is one of `isotropic`, `dipole_linear`, `dipole_circular`.
#[no_mangle]
pub unsafe extern "C" fn cc_params_set_pattern(params: *mut CcCoolingParams, name: *const c_char) -> CcStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(CcStatus::InvalidParameter, "invalid_parameter: pattern name is not UTF-8".into()))?;
        let pattern = EmissionPattern::parse(name)?;
        let p = params_mut(params)?;
        p.pattern = pattern;
        Ok(())
    })
}

/// Tabulated pattern from `len` pairs `(cos[i], density[i])`.
#[no_mangle]
pub unsafe extern "C" fn cc_params_set_pattern_table(
    params: *mut CcCoolingParams,
    cos: *const f64,
    density: *const f64,
    len: usize,
) -> CcStatus {
    guard(|| {
        if cos.is_null() || density.is_null() {
            return Err(null("table"));
        }
        let c = std::slice::from_raw_parts(cos, len);
        let d = std::slice::from_raw_parts(density, len);
        let pattern = EmissionPattern::Custom(c.iter().copied().zip(d.iter().copied()).collect());
        pattern.validate()?;
        params_mut(params)?.pattern = pattern;
        Ok(())
    })
}

/// Total steady-state energy of the Fokker-Planck limit.
#[no_mangle]
pub unsafe extern "C" fn cc_steady_energy(params: *const CcCoolingParams, out: *mut f64) -> CcStatus {
    guard(|| write(out, steady_energy(params_ref(params)?)?, "out"))
}

/// Exponential relaxation rate of the mean energy.
#[no_mangle]
pub unsafe extern "C" fn cc_cooling_rate(params: *const CcCoolingParams, out: *mut f64) -> CcStatus {
    guard(|| write(out, cooling_rate(params_ref(params)?)?, "out"))
}

/// Lamb-Dicke steady occupations per mode.
#[no_mangle]
pub unsafe extern "C" fn cc_ld_steady(
    chain: *const CcChain,
    params: *const CcCoolingParams,
    out: *mut f64,
    len: usize,
) -> CcStatus {
    guard(|| fill(out, len, &ld_steady(&chain_ref(chain)?.spectrum, params_ref(params)?)?))
}

/// `|<l| exp(i eta (a + a†)) |n>|^2`.
#[no_mangle]
pub unsafe extern "C" fn cc_fc_probability(n: u32, l: u32, eta: f64, out: *mut f64) -> CcStatus {
    guard(|| write(out, fc_single_prob(n, l, eta), "out"))
}

/// Normalization, mean shift and variance of the energy-transfer kernel.
#[no_mangle]
pub unsafe extern "C" fn cc_kernel_moments(
    energy: f64,
    recoil: f64,
    n_ions: usize,
    norm: *mut f64,
    mean_shift: *mut f64,
    variance: *mut f64,
) -> CcStatus {
    guard(|| {
        let m = kernel_moments(&KernelParams::new(energy, recoil, n_ions)?, &GaussLegendre::new(DEFAULT_NODES));
        write(norm, m.norm, "norm")?;
        write(mean_shift, m.mean_shift, "mean_shift")?;
        write(variance, m.variance, "variance")
    })
}

/// Integrates the ergodic rate equation from a thermal start of mean energy
/// `e0` on shells of width `de` up to `emax` and reports the mean energy at
/// `t_final`. A non-positive `dt` selects the stability bound.
#[no_mangle]
pub unsafe extern "C" fn cc_evolve_ergodic(
    chain: *const CcChain,
    params: *const CcCoolingParams,
    de: f64,
    emax: f64,
    e0: f64,
    t_final: f64,
    dt: f64,
    mean_energy: *mut f64,
) -> CcStatus {
    guard(|| {
        let chain = chain_ref(chain)?;
        let params = params_ref(params)?;
        if mean_energy.is_null() {
            return Err(null("mean_energy"));
        }
        let n = params.n_ions;
        let grid = EnergyGrid::anchored(&chain.spectrum, de, emax)?;
        let op = ErgodicOperator::build(params, &chain.spectrum, &grid, ANGULAR_NODES)?;
        let p0 = EnergyDistribution::thermal(&grid, n, e0 / n as f64)?;
        let opts = ErgodicOptions { dt: (dt > 0.0).then_some(dt), record_interval: None, angular_nodes: ANGULAR_NODES };
        let run = op.evolve(&p0, t_final, &opts)?;
        mean_energy.write(run.final_state.mean_energy());
        Ok(())
    })
}

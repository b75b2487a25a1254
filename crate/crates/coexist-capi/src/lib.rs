//! C ABI over the coexist library.
//!
//! Conventions: configurations are opaque handles created and destroyed by
//! this library; every function returns a [`CoexStatus`] and writes results
//! through out-pointers; the last error message per thread is available via
//! [`coexist_last_error_message`] until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use coexist::analytic::{throughput_report, Method};
use coexist::optimizer::{optimize, OptimizationSpec};
use coexist::sim::{run, SimConfig};
use coexist::{Error, SystemConfig};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidConfig = 2,
    SolverFailure = 3,
    Infeasible = 4,
    InternalPanic = 5,
}

/// Computation route selector for `coexist_analyze`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoexMethod {
    ClosedForm = 0,
    ChainSolve = 1,
}

/// Throughput fractions for one scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CoexThroughput {
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub lambda_total: f64,
    pub alpha_c: f64,
}

/// Counters and empirical rates of one simulation run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CoexSimStats {
    pub n_success_a: u64,
    pub n_success_c: u64,
    pub collisions_a: u64,
    pub collisions_c: u64,
    pub lambda_a_hat: f64,
    pub lambda_c_hat: f64,
    pub idle_fraction: f64,
}

/// Optimum of the proportion-constrained throughput maximization.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CoexOptimum {
    pub rho_a: f64,
    pub rho_c: f64,
    pub l_c: u32,
    pub lambda_max: f64,
    pub achieved_ratio: f64,
}

/// Opaque scenario handle.
pub struct CoexConfig {
    inner: SystemConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

fn status_of(err: &Error) -> CoexStatus {
    match err {
        Error::InvalidConfig(_) | Error::OffsetOutOfRange { .. } | Error::Domain { .. } => {
            CoexStatus::InvalidConfig
        }
        Error::Infeasible(_) => CoexStatus::Infeasible,
        _ => CoexStatus::SolverFailure,
    }
}

fn guard<F: FnOnce() -> CoexStatus>(f: F) -> CoexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            CoexStatus::InternalPanic
        }
    }
}

/// Version string of the underlying library; static storage, do not free.
#[no_mangle]
pub extern "C" fn coexist_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the most recent failure on this thread. Valid until
/// the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn coexist_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a scenario from per-node transmission probabilities.
///
/// # Safety
/// `out` must be a valid pointer; the returned handle must be released with
/// `coexist_config_free`.
#[no_mangle]
pub unsafe extern "C" fn coexist_config_new(
    n_a: u32,
    n_c: u32,
    q_a: f64,
    q_c: f64,
    s: u32,
    l_c: u32,
    out: *mut *mut CoexConfig,
) -> CoexStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return CoexStatus::NullArgument;
        }
        match SystemConfig::new(n_a, n_c, q_a, q_c, s, l_c) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(CoexConfig { inner })) };
                CoexStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Create a scenario from collective no-transmission probabilities,
/// inverting `rho = (1-q)^n`.
///
/// # Safety
/// As `coexist_config_new`.
#[no_mangle]
pub unsafe extern "C" fn coexist_config_from_rho(
    n_a: u32,
    n_c: u32,
    rho_a: f64,
    rho_c: f64,
    s: u32,
    l_c: u32,
    out: *mut *mut CoexConfig,
) -> CoexStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return CoexStatus::NullArgument;
        }
        match SystemConfig::from_rho(n_a, n_c, rho_a, rho_c, s, l_c) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(CoexConfig { inner })) };
                CoexStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a scenario handle. Null is accepted and ignored.
///
/// # Safety
/// `config` must have come from a `coexist_config_*` constructor and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coexist_config_free(config: *mut CoexConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Evaluate throughputs through the selected route.
///
/// # Safety
/// `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn coexist_analyze(
    config: *const CoexConfig,
    method: CoexMethod,
    out: *mut CoexThroughput,
) -> CoexStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_error("null argument".into());
            return CoexStatus::NullArgument;
        }
        let cfg = unsafe { &(*config).inner };
        let method = match method {
            CoexMethod::ClosedForm => Method::ClosedForm,
            CoexMethod::ChainSolve => Method::ChainSolve,
        };
        match throughput_report(cfg, method) {
            Ok(rep) => {
                unsafe {
                    *out = CoexThroughput {
                        lambda_a: rep.lambda_a,
                        lambda_c: rep.lambda_c,
                        lambda_total: rep.lambda_total,
                        alpha_c: rep.alpha_c,
                    };
                }
                CoexStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Run the generic-mode simulator for `duration` mini-slots.
///
/// # Safety
/// `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn coexist_simulate(
    config: *const CoexConfig,
    duration: u64,
    seed: u64,
    out: *mut CoexSimStats,
) -> CoexStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_error("null argument".into());
            return CoexStatus::NullArgument;
        }
        let cfg = unsafe { &(*config).inner };
        let sim_cfg = match SimConfig::generic(*cfg, duration, seed) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match run(&sim_cfg) {
            Ok(res) => {
                unsafe {
                    *out = CoexSimStats {
                        n_success_a: res.n_success_a,
                        n_success_c: res.n_success_c,
                        collisions_a: res.collisions_a,
                        collisions_c: res.collisions_c,
                        lambda_a_hat: res.lambda_a_hat,
                        lambda_c_hat: res.lambda_c_hat,
                        idle_fraction: res.idle_fraction,
                    };
                }
                CoexStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Maximize total throughput under the desired proportion `gamma`, searching
/// packet times 1..=l_c_max.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coexist_optimize(
    gamma: f64,
    n_a: u32,
    n_c: u32,
    s: u32,
    l_c_max: u32,
    rho_a_step: f64,
    out: *mut CoexOptimum,
) -> CoexStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null".into());
            return CoexStatus::NullArgument;
        }
        let spec = OptimizationSpec::new(gamma, n_a, n_c, s)
            .map(|sp| sp.with_candidates((1..=l_c_max.max(1)).collect()))
            .map(|sp| sp.with_rho_a_step(if rho_a_step > 0.0 { rho_a_step } else { 1e-3 }));
        let spec = match spec {
            Ok(sp) => sp,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match optimize(&spec) {
            Ok(res) => {
                unsafe {
                    *out = CoexOptimum {
                        rho_a: res.rho_a_opt,
                        rho_c: res.rho_c_opt,
                        l_c: res.l_c_opt,
                        lambda_max: res.lambda_max,
                        achieved_ratio: res.achieved_ratio,
                    };
                }
                CoexStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

//! Exercises the C surface through the exported symbols, the way a foreign
//! binding would.

use std::ffi::CStr;
use std::ptr;

use coexist_capi::{
    coexist_analyze, coexist_config_free, coexist_config_from_rho, coexist_config_new,
    coexist_last_error_message, coexist_optimize, coexist_simulate, coexist_version, CoexConfig,
    CoexMethod, CoexOptimum, CoexSimStats, CoexStatus, CoexThroughput,
};

#[test]
fn version_is_a_c_string() {
    let ptr = coexist_version();
    let s = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap();
    assert!(!s.is_empty());
}

#[test]
fn analyze_routes_agree_through_the_abi() {
    unsafe {
        let mut cfg: *mut CoexConfig = ptr::null_mut();
        let st = coexist_config_from_rho(1, 20, 0.5, 0.5, 4, 5, &mut cfg);
        assert_eq!(st, CoexStatus::Ok);
        let mut closed = CoexThroughput::default();
        let mut chain = CoexThroughput::default();
        assert_eq!(coexist_analyze(cfg, CoexMethod::ClosedForm, &mut closed), CoexStatus::Ok);
        assert_eq!(coexist_analyze(cfg, CoexMethod::ChainSolve, &mut chain), CoexStatus::Ok);
        assert!((closed.lambda_a - chain.lambda_a).abs() < 1e-9);
        assert!((closed.lambda_c - chain.lambda_c).abs() < 1e-9);
        assert!((closed.alpha_c - chain.alpha_c).abs() < 1e-9);
        coexist_config_free(cfg);
    }
}

#[test]
fn invalid_config_reports_an_error_message() {
    unsafe {
        let mut cfg: *mut CoexConfig = ptr::null_mut();
        let st = coexist_config_new(1, 1, 1.5, 0.0, 2, 2, &mut cfg);
        assert_eq!(st, CoexStatus::InvalidConfig);
        let msg = CStr::from_ptr(coexist_last_error_message()).to_str().unwrap();
        assert!(msg.contains("q_a"));
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(
            coexist_config_new(1, 1, 0.1, 0.1, 2, 2, ptr::null_mut()),
            CoexStatus::NullArgument
        );
        let mut out = CoexThroughput::default();
        assert_eq!(
            coexist_analyze(ptr::null(), CoexMethod::ClosedForm, &mut out),
            CoexStatus::NullArgument
        );
        coexist_config_free(ptr::null_mut());
    }
}

#[test]
fn simulation_is_deterministic_through_the_abi() {
    unsafe {
        let mut cfg: *mut CoexConfig = ptr::null_mut();
        assert_eq!(
            coexist_config_new(3, 3, 0.2, 0.1, 4, 3, &mut cfg),
            CoexStatus::Ok
        );
        let mut a = CoexSimStats::default();
        let mut b = CoexSimStats::default();
        assert_eq!(coexist_simulate(cfg, 50_000, 9, &mut a), CoexStatus::Ok);
        assert_eq!(coexist_simulate(cfg, 50_000, 9, &mut b), CoexStatus::Ok);
        assert_eq!(a.n_success_a, b.n_success_a);
        assert_eq!(a.n_success_c, b.n_success_c);
        assert_eq!(a.idle_fraction, b.idle_fraction);
        coexist_config_free(cfg);
    }
}

#[test]
fn optimizer_hits_the_proportion_target() {
    unsafe {
        let mut out = CoexOptimum::default();
        let st = coexist_optimize(1.0, 1, 8, 8, 8, 1e-2, &mut out);
        assert_eq!(st, CoexStatus::Ok);
        assert!((out.achieved_ratio - 1.0).abs() <= 1e-6);
        assert!(out.l_c >= 1 && out.l_c <= 8);
        assert!(out.lambda_max > 0.0);
    }
}

#[test]
fn infeasible_problems_return_the_infeasible_code() {
    unsafe {
        let mut out = CoexOptimum::default();
        let st = coexist_optimize(1.0, 0, 8, 8, 8, 1e-2, &mut out);
        assert_eq!(st, CoexStatus::Infeasible);
    }
}

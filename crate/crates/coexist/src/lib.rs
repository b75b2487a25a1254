//! Dual-channel Markov-renewal modeling of coexisting slotted Aloha and
//! CSMA networks.
//!
//! The crate provides four pillars:
//!
//! - [`chain`]: exact enumeration and solution of the embedded renewal
//!   process over both channels;
//! - [`analytic`]: the closed-form path through the idle-state linear
//!   system and the explicit throughput formulas;
//! - [`optimizer`]: constrained total-throughput maximization under a
//!   desired throughput proportion, numeric and closed-form;
//! - [`sim`] and [`casestudy`]: a mini-slot discrete-event simulator used
//!   as the independent check, plus the LTE-U/WiFi parameter mapping and
//!   robustness sweeps.
//!
//! Both computation routes (chain solve and closed form) must agree to
//! within 1e-9 on every valid configuration; the acceptance suite pins
//! that contract.

pub mod analytic;
pub mod casestudy;
pub mod chain;
pub mod config;
pub mod error;
pub mod lambertw;
pub mod linalg;
pub mod optimizer;
pub mod sim;

pub use analytic::{
    alpha_c, aloha_throughput, csma_throughput, dual_path_gap, span_counts, throughput_report,
    Method, Provenance, Scenario, SpanCounts, ThroughputReport,
};
pub use casestudy::{
    cw_from_rho_c, derive_deployment, robustness_lw, robustness_nw, DeploymentConfig,
    DeploymentInput, SweepRow,
};
pub use chain::{
    busy_from_idle, enumerate_chain, holding_time, ChainState, ChannelStatus, EmbeddedChain,
};
pub use config::{DerivedRates, SystemConfig};
pub use error::{Error, Result};
pub use lambertw::lambert_w0;
pub use optimizer::{
    closed_form_optimum, optimize, ratio_solve_rho_c, ClosedFormRegime, OptimizationResult,
    OptimizationSpec, SolveMethod,
};
pub use sim::{run, run_batch, SimConfig, SimResult, SimSystem, WifiLteConfig};

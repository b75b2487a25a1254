//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by model construction, solvers and the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration violated a domain invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A state was outside the admissible offset range for its class.
    #[error("state offset {d} out of range for {class} (valid {lo}..={hi})")]
    OffsetOutOfRange {
        class: &'static str,
        d: i64,
        lo: i64,
        hi: i64,
    },

    /// The linear system was singular; occurs only at degenerate boundary
    /// parameterizations.
    #[error("degenerate parameterization: singular linear system in {context}")]
    SingularSystem { context: &'static str },

    /// The reachable chain split into more than one communicating class.
    #[error("embedded chain is not irreducible on its reachable set ({detail})")]
    NotIrreducible { detail: String },

    /// Reachable state count exceeded the configured cap.
    #[error("state space exceeded cap: {count} states, cap {cap}")]
    StateCapExceeded { count: usize, cap: usize },

    /// A model identity failed to hold within tolerance.
    #[error("model consistency violation in {context}: |{got} - {want}| = {diff:e} > {tol:e}")]
    ConsistencyMismatch {
        context: String,
        got: f64,
        want: f64,
        diff: f64,
        tol: f64,
    },

    /// No parameter choice satisfies the throughput-proportion constraint.
    #[error("optimization infeasible: {0}")]
    Infeasible(String),

    /// A bracketed root search failed to converge.
    #[error("root finding failed in {context}: {detail}")]
    RootFind { context: &'static str, detail: String },

    /// An argument fell outside a function's mathematical domain.
    #[error("domain error in {context}: {detail}")]
    Domain { context: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

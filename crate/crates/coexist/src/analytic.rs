//! Closed-form throughput path: the idle-state coefficient system
//! `y = A y + b`, the idle probability, and the Aloha/CSMA throughput
//! formulas with their special-case reductions.
//!
//! For a CSMA packet time that is a whole number of slots everything has an
//! explicit form; otherwise the idle probabilities come from a direct
//! linear solve and the busy-state probabilities are reconstructed from
//! them through the sensing relations.

use serde::{Deserialize, Serialize};

use crate::chain::{enumerate_chain, ChainState, ChannelStatus};
use crate::config::{DerivedRates, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, DMat};

/// A coexistence scenario in no-transmission-probability space. The
/// per-node probabilities only enter through the success factors, so the
/// analytic path is parameterized by `rho` values directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_a: u32,
    pub n_c: u32,
    pub s: u32,
    pub l_c: u32,
    pub rho_a: f64,
    pub rho_c: f64,
}

impl Scenario {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Scenario {
            n_a: cfg.n_a,
            n_c: cfg.n_c,
            s: cfg.s,
            l_c: cfg.l_c,
            rho_a: cfg.rho_a(),
            rho_c: cfg.rho_c(),
        }
    }

    pub fn from_rho(n_a: u32, n_c: u32, s: u32, l_c: u32, rho_a: f64, rho_c: f64) -> Result<Self> {
        if s < 1 || l_c < 1 {
            return Err(Error::InvalidConfig("s and l_c must be >= 1".into()));
        }
        for (name, rho) in [("rho_a", rho_a), ("rho_c", rho_c)] {
            if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {rho}")));
            }
        }
        Ok(Scenario { n_a, n_c, s, l_c, rho_a, rho_c })
    }

    pub fn rates(&self) -> DerivedRates {
        DerivedRates::from_rho(self.rho_a, self.rho_c, self.s)
    }

    pub fn a(&self) -> f64 {
        1.0 / self.s as f64
    }

    pub fn is_integer_multiple(&self) -> bool {
        self.l_c.is_multiple_of(self.s)
    }
}

/// Coefficients of the idle-state system, one set per template case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixCoefficients {
    /// floor(a l_c) * rho_a * (rho_c - 1), long-packet head row
    pub h: f64,
    /// ceil(a l_c) * rho_a * (rho_c - 1), long-packet head row
    pub e: f64,
    /// rho_c
    pub v: f64,
    /// rho_a * (1 - rho_c)
    pub z: f64,
    /// a l_c * rho_a * (rho_c - 1), whole-slot-multiple head row
    pub g: f64,
    /// v + z, the idle decay factor
    pub f: f64,
    /// rho_a * (rho_c - 1), short-packet head row
    pub u: f64,
    /// 1 - rho_c, short-packet wrap-around
    pub w: f64,
}

impl MatrixCoefficients {
    pub fn new(scn: &Scenario) -> Self {
        let (rho_a, rho_c) = (scn.rho_a, scn.rho_c);
        let floor_alc = (scn.l_c / scn.s) as f64;
        let ceil_alc = (scn.l_c.div_ceil(scn.s)) as f64;
        let v = rho_c;
        let z = rho_a * (1.0 - rho_c);
        MatrixCoefficients {
            h: floor_alc * rho_a * (rho_c - 1.0),
            e: ceil_alc * rho_a * (rho_c - 1.0),
            v,
            z,
            g: (scn.l_c as f64 / scn.s as f64) * rho_a * (rho_c - 1.0),
            f: v + z,
            u: rho_a * (rho_c - 1.0),
            w: 1.0 - rho_c,
        }
    }
}

/// The idle-state linear system and, after solving, the idle limiting
/// probabilities per phase.
#[derive(Debug, Clone, Serialize)]
pub struct IdleSystem {
    pub a: DMat,
    pub b: Vec<f64>,
    /// y[d] = limiting probability of both channels idle at phase d.
    pub y: Vec<f64>,
}

/// Build the s-by-s coefficient matrix for the idle-state system.
///
/// The template depends on how the packet time relates to the slot length.
/// For `l_c >= s` the head row mixes the floor and ceiling coefficients
/// with the floor block spanning `s - (l_c mod s)` columns; rows below
/// carry `v` on the subdiagonal and `z` on the column `l_c + 1` phases back
/// (the two coincide and sum to `f` when `l_c` is a whole number of
/// slots). For `l_c < s` the head row is zero outside the last `l_c`
/// columns, and the band `l_c + 1` phases back carries `w` where the
/// feeding packet started mid-slot and `z` where it spilled over a
/// boundary.
pub fn build_idle_system(scn: &Scenario) -> IdleSystem {
    let s = scn.s as usize;
    let l_c = scn.l_c as usize;
    let co = MatrixCoefficients::new(scn);
    let mut a = DMat::zeros(s, s);

    if l_c >= s {
        let width = s - (l_c % s);
        for j in 0..s {
            a[(0, j)] = if j < width { co.h } else { co.e };
        }
        for i in 1..s {
            a[(i, i - 1)] += co.v;
            a[(i, (i - 1 + width) % s)] += co.z;
        }
    } else {
        for j in (s - l_c)..s {
            a[(0, j)] = co.u;
        }
        // each idle phase i is fed by the packet that ended there, which
        // started at offset i - l_c: mid-slot starts feed directly (w),
        // boundary-fed spill-overs carry the Aloha redraw factor (z)
        for i in 1..s {
            a[(i, i - 1)] += co.v;
            if i > l_c {
                a[(i, i - l_c - 1)] += co.w;
            } else {
                a[(i, i + s - l_c - 1)] += co.z;
            }
        }
    }

    let mut b = vec![0.0; s];
    b[0] = scn.a() * scn.rho_a;
    IdleSystem { a, b, y: Vec::new() }
}

/// Solve the idle-state system `y = A y + b`.
pub fn solve_idle(scn: &Scenario) -> Result<IdleSystem> {
    let mut sys = build_idle_system(scn);
    let s = scn.s as usize;
    // (I - A) y = b
    let mut m = DMat::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            m[(i, j)] = if i == j { 1.0 } else { 0.0 } - sys.a[(i, j)];
        }
    }
    let mut y = sys.b.clone();
    lu_solve(&mut m, &mut y, "idle-state system")?;
    for v in &mut y {
        if v.abs() < 1e-300 {
            *v = 0.0;
        }
    }
    let residual = sys
        .a
        .mul_vec(&y)
        .iter()
        .zip(&sys.b)
        .zip(&y)
        .map(|((ay, b), y)| (ay + b - y).abs())
        .fold(0.0f64, f64::max);
    if residual > 1e-12 {
        return Err(Error::ConsistencyMismatch {
            context: "idle-state system residual".into(),
            got: residual,
            want: 0.0,
            diff: residual,
            tol: 1e-12,
        });
    }
    sys.y = y;
    Ok(sys)
}

/// With a silent Aloha side the slot structure is irrelevant and the CSMA
/// channel is a plain renewal cycle: a geometric idle run, then a packet.
fn pure_csma_idle_fraction(scn: &Scenario) -> f64 {
    1.0 / (1.0 + scn.l_c as f64 * (1.0 - scn.rho_c))
}

fn pure_csma_throughput(scn: &Scenario) -> f64 {
    if scn.n_c == 0 || scn.rho_c == 1.0 {
        return 0.0;
    }
    let n = scn.n_c as f64;
    scn.l_c as f64 * n * scn.rho_c.powf((n - 1.0) / n) * (1.0 - scn.rho_c.powf(1.0 / n))
        / (1.0 + scn.l_c as f64 * (1.0 - scn.rho_c))
}

/// Long-run fraction of time the coexisting network is idle, from the
/// linear-solve route.
pub fn alpha_c(cfg: &SystemConfig) -> Result<f64> {
    alpha_c_scn(&Scenario::from_config(cfg))
}

pub fn alpha_c_scn(scn: &Scenario) -> Result<f64> {
    if scn.rho_a == 1.0 {
        return Ok(pure_csma_idle_fraction(scn));
    }
    Ok(solve_idle(scn)?.y.iter().sum())
}

/// Explicit idle probability for packet times that are whole slot
/// multiples.
pub fn alpha_c_integer_closed(scn: &Scenario) -> f64 {
    debug_assert!(scn.is_integer_multiple());
    let DerivedRates { rho_a, rho_c, phi, .. } = scn.rates();
    if rho_a == 1.0 && rho_c == 1.0 {
        return 1.0;
    }
    if rho_c == 1.0 {
        return rho_a;
    }
    if rho_a == 1.0 {
        return 1.0 / (1.0 + scn.l_c as f64 * (1.0 - rho_c));
    }
    let lca = scn.l_c as f64 / scn.s as f64;
    scn.a() * rho_a * (1.0 - phi)
        / (lca * rho_a * (1.0 - rho_c) * (1.0 - phi) + (1.0 - rho_a) * (1.0 - rho_c))
}

/// Reduction of the idle probability at `l_c = s`.
pub fn alpha_c_equal_closed(scn: &Scenario) -> f64 {
    debug_assert_eq!(scn.l_c, scn.s);
    let DerivedRates { rho_a, rho_c, phi, .. } = scn.rates();
    if rho_a == 1.0 && rho_c == 1.0 {
        return 1.0;
    }
    if rho_c == 1.0 {
        return rho_a;
    }
    if rho_a == 1.0 {
        return 1.0 / (1.0 + scn.s as f64 * (1.0 - rho_c));
    }
    scn.a() * rho_a * (1.0 - phi) / ((1.0 - rho_a * phi) * (1.0 - rho_c))
}

/// Number of time slots spanned by a CSMA packet starting at each phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanCounts {
    pub m: Vec<u32>,
}

/// Slots spanned per starting phase. For whole-slot multiples a packet
/// starting at the boundary spans exactly `l_c/s` slots and one more from
/// any later phase; otherwise the first branch holds through phase
/// `s - (l_c mod s)` inclusive, which is where the packet end first aligns
/// with a slot boundary.
pub fn span_counts(scn: &Scenario) -> SpanCounts {
    let s = scn.s;
    let l_c = scn.l_c;
    let m = if l_c.is_multiple_of(s) {
        let base = l_c / s;
        (0..s).map(|k| if k == 0 { base } else { base + 1 }).collect()
    } else {
        let ceil = l_c.div_ceil(s);
        let split = s - (l_c % s);
        (0..s).map(|k| if k <= split { ceil } else { ceil + 1 }).collect()
    };
    SpanCounts { m }
}

/// Probability that exactly one node transmits given at least one does,
/// for `n` nodes with collective silence probability `rho`.
pub fn conditional_success(n: u32, rho: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if rho == 1.0 {
        // q -> 0 limit of n q (1-q)^(n-1) / (1 - (1-q)^n)
        return 1.0;
    }
    let nf = n as f64;
    nf * (1.0 - rho.powf(1.0 / nf)) * rho.powf((nf - 1.0) / nf) / (1.0 - rho)
}

/// Limiting probability of an Aloha packet starting on a clear channel,
/// reconstructed from the idle-state probabilities: phase 0 owns `a` of
/// time, minus the idle share, minus the share of CSMA packets covering
/// phase 0 (exactly those with non-positive start offset).
pub fn pi_tilde_aloha_clear(scn: &Scenario, y: &[f64]) -> f64 {
    let s = scn.s as i64;
    let mut spill = 0.0;
    for j in 0..scn.l_c as i64 {
        spill += y[(-j - 1).rem_euclid(s) as usize];
    }
    scn.a() - y[0] - (1.0 - scn.rho_c) * spill
}

/// Limiting probability of a CSMA packet starting at phase k under an idle
/// Aloha channel, from the idle-state probabilities.
pub fn pi_tilde_csma_start(scn: &Scenario, y: &[f64], k: u32) -> f64 {
    let s = scn.s;
    let tau = (k + scn.l_c).min(s) - k;
    let coeff = if k == 0 {
        scn.rho_a * (1.0 - scn.rho_c) * y[s as usize - 1]
    } else {
        (1.0 - scn.rho_c) * y[k as usize - 1]
    };
    coeff * f64::from(tau)
}

/// Aloha network throughput via the analytic route.
pub fn aloha_throughput(cfg: &SystemConfig) -> Result<f64> {
    aloha_throughput_scn(&Scenario::from_config(cfg))
}

pub fn aloha_throughput_scn(scn: &Scenario) -> Result<f64> {
    if scn.n_a == 0 || scn.rho_a == 1.0 {
        return Ok(0.0);
    }
    if scn.is_integer_multiple() {
        return Ok(aloha_throughput_integer_closed(scn));
    }
    let y = solve_idle(scn)?.y;
    Ok(pi_tilde_aloha_clear(scn, &y) * conditional_success(scn.n_a, scn.rho_a) * scn.s as f64)
}

/// Explicit Aloha throughput for whole-slot packet multiples.
pub fn aloha_throughput_integer_closed(scn: &Scenario) -> f64 {
    debug_assert!(scn.is_integer_multiple());
    if scn.n_a == 0 || scn.rho_a == 1.0 {
        return 0.0;
    }
    let DerivedRates { rho_a, phi, .. } = scn.rates();
    let n = scn.n_a as f64;
    let lca = (scn.l_c / scn.s) as f64;
    n * rho_a.powf((n - 1.0) / n) * (1.0 - rho_a.powf(1.0 / n)) * (1.0 - rho_a)
        / (lca * rho_a * (1.0 - phi) + 1.0 - rho_a)
}

/// Reduction of the Aloha throughput at `l_c = s`.
pub fn aloha_throughput_equal_closed(scn: &Scenario) -> f64 {
    debug_assert_eq!(scn.l_c, scn.s);
    if scn.n_a == 0 || scn.rho_a == 1.0 {
        return 0.0;
    }
    let DerivedRates { rho_a, phi, .. } = scn.rates();
    let n = scn.n_a as f64;
    n * rho_a.powf((n - 1.0) / n) * (1.0 - rho_a.powf(1.0 / n)) * (1.0 - rho_a)
        / (1.0 - rho_a * phi)
}

/// CSMA network throughput via the analytic route.
pub fn csma_throughput(cfg: &SystemConfig) -> Result<f64> {
    csma_throughput_scn(&Scenario::from_config(cfg))
}

pub fn csma_throughput_scn(scn: &Scenario) -> Result<f64> {
    if scn.n_c == 0 || scn.rho_c == 1.0 {
        return Ok(0.0);
    }
    if scn.rho_a == 1.0 {
        return Ok(pure_csma_throughput(scn));
    }
    if scn.is_integer_multiple() {
        return Ok(csma_throughput_integer_closed(scn));
    }
    let y = solve_idle(scn)?.y;
    let spans = span_counts(scn);
    let succ = conditional_success(scn.n_c, scn.rho_c);
    let mut total = 0.0;
    for k in 0..scn.s {
        let tau = f64::from((k + scn.l_c).min(scn.s) - k);
        let no_midway = scn.rho_a.powi(spans.m[k as usize] as i32 - 1);
        total += pi_tilde_csma_start(scn, &y, k) * no_midway * (scn.l_c as f64 / tau) * succ;
    }
    Ok(total)
}

/// Explicit CSMA throughput for whole-slot packet multiples.
pub fn csma_throughput_integer_closed(scn: &Scenario) -> f64 {
    debug_assert!(scn.is_integer_multiple());
    if scn.n_c == 0 || scn.rho_c == 1.0 {
        return 0.0;
    }
    let DerivedRates { rho_a, rho_c, phi, .. } = scn.rates();
    let n = scn.n_c as f64;
    let lca = (scn.l_c / scn.s) as f64;
    if rho_a == 1.0 {
        return scn.l_c as f64 * n * rho_c.powf((n - 1.0) / n) * (1.0 - rho_c.powf(1.0 / n))
            / (1.0 + scn.l_c as f64 * (1.0 - rho_c));
    }
    lca * n
        * rho_a.powf(lca + 1.0)
        * rho_c.powf((n - 1.0) / n)
        * (1.0 - rho_c.powf(1.0 / n))
        * (1.0 - phi)
        / (lca * rho_a * (1.0 - rho_c) * (1.0 - phi) + (1.0 - rho_a) * (1.0 - rho_c))
}

/// Reduction of the CSMA throughput at `l_c = s`.
pub fn csma_throughput_equal_closed(scn: &Scenario) -> f64 {
    debug_assert_eq!(scn.l_c, scn.s);
    if scn.n_c == 0 || scn.rho_c == 1.0 {
        return 0.0;
    }
    let DerivedRates { rho_a, rho_c, phi, .. } = scn.rates();
    let n = scn.n_c as f64;
    if rho_a == 1.0 {
        return scn.s as f64 * n * rho_c.powf((n - 1.0) / n) * (1.0 - rho_c.powf(1.0 / n))
            / (1.0 + scn.s as f64 * (1.0 - rho_c));
    }
    n * rho_a.powi(2) * (1.0 - rho_c.powf(1.0 / n)) * rho_c.powf((n - 1.0) / n) * (1.0 - phi)
        / ((1.0 - rho_c) * (1.0 - rho_a * phi))
}

/// Where a throughput figure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    ChainSolve,
    Simulation,
}

/// Which analytic route to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    ChainSolve,
}

/// Channel-time throughput fractions for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub lambda_total: f64,
    pub alpha_c: f64,
    pub provenance: Provenance,
    /// Human-readable note on the evaluation route taken.
    pub route: String,
}

/// Evaluate the scenario through the requested route.
pub fn throughput_report(cfg: &SystemConfig, method: Method) -> Result<ThroughputReport> {
    cfg.validate()?;
    match method {
        Method::ClosedForm => throughput_report_scn(&Scenario::from_config(cfg)),
        Method::ChainSolve => {
            let chain = enumerate_chain(cfg)?;
            let scn = Scenario::from_config(cfg);
            let succ_a = conditional_success(scn.n_a, scn.rho_a);
            let succ_c = conditional_success(scn.n_c, scn.rho_c);
            let lambda_a = chain.pi_tilde_of(&ChainState::new(
                ChannelStatus::Busy,
                ChannelStatus::Idle,
                0,
            )) * succ_a
                * scn.s as f64;
            let spans = span_counts(&scn);
            let mut lambda_c = 0.0;
            for k in 0..scn.s {
                let st = ChainState::new(ChannelStatus::Idle, ChannelStatus::Busy, k as i64);
                let pi_t = chain.pi_tilde_of(&st);
                if pi_t == 0.0 {
                    continue;
                }
                let tau = f64::from((k + scn.l_c).min(scn.s) - k);
                lambda_c += pi_t
                    * scn.rho_a.powi(spans.m[k as usize] as i32 - 1)
                    * (scn.l_c as f64 / tau)
                    * succ_c;
            }
            Ok(ThroughputReport {
                lambda_a,
                lambda_c,
                lambda_total: lambda_a + lambda_c,
                alpha_c: chain.alpha_c(),
                provenance: Provenance::ChainSolve,
                route: format!("embedded chain, {} states", chain.states.len()),
            })
        }
    }
}

/// Closed-form route in rho space; used directly by the optimizer.
pub fn throughput_report_scn(scn: &Scenario) -> Result<ThroughputReport> {
    if scn.rho_a == 1.0 {
        let lambda_c = pure_csma_throughput(scn);
        return Ok(ThroughputReport {
            lambda_a: 0.0,
            lambda_c,
            lambda_total: lambda_c,
            alpha_c: pure_csma_idle_fraction(scn),
            provenance: Provenance::ClosedForm,
            route: "silent Aloha side (renewal cycle)".to_string(),
        });
    }
    let (lambda_a, lambda_c, alpha, route) = if scn.is_integer_multiple() {
        (
            aloha_throughput_integer_closed(scn),
            csma_throughput_integer_closed(scn),
            alpha_c_integer_closed(scn),
            "integer-multiple closed form".to_string(),
        )
    } else {
        let y = solve_idle(scn)?.y;
        let lambda_a = if scn.n_a == 0 || scn.rho_a == 1.0 {
            0.0
        } else {
            pi_tilde_aloha_clear(scn, &y) * conditional_success(scn.n_a, scn.rho_a) * scn.s as f64
        };
        let lambda_c = if scn.n_c == 0 || scn.rho_c == 1.0 {
            0.0
        } else {
            let spans = span_counts(scn);
            let succ = conditional_success(scn.n_c, scn.rho_c);
            let mut total = 0.0;
            for k in 0..scn.s {
                let tau = f64::from((k + scn.l_c).min(scn.s) - k);
                total += pi_tilde_csma_start(scn, &y, k)
                    * scn.rho_a.powi(spans.m[k as usize] as i32 - 1)
                    * (scn.l_c as f64 / tau)
                    * succ;
            }
            total
        };
        (lambda_a, lambda_c, y.iter().sum(), "general case (linear solve)".to_string())
    };
    Ok(ThroughputReport {
        lambda_a,
        lambda_c,
        lambda_total: lambda_a + lambda_c,
        alpha_c: alpha,
        provenance: Provenance::ClosedForm,
        route,
    })
}

/// Largest absolute disagreement between the closed-form and chain routes.
pub fn dual_path_gap(cfg: &SystemConfig) -> Result<f64> {
    let closed = throughput_report(cfg, Method::ClosedForm)?;
    let chain = throughput_report(cfg, Method::ChainSolve)?;
    Ok([
        (closed.lambda_a - chain.lambda_a).abs(),
        (closed.lambda_c - chain.lambda_c).abs(),
        (closed.alpha_c - chain.alpha_c).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

//! Mini-slot discrete-event simulator of the coexisting network.
//!
//! Two flavors share one engine: the generic mode mirrors the analytic
//! abstraction (slotted transmitters fire at slot boundaries with a fixed
//! probability; sensing transmitters attempt with a per-mini-slot
//! probability after an idle mini-slot), and the wifi-lte mode runs real
//! single-stage DCF backoff counters against a duty-cycled transmitter,
//! with failed packets cut short by the missing ACK exchange.
//!
//! Every node owns its own RNG stream derived from (seed, node id), so
//! results do not depend on evaluation order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Mini-slots a failed WiFi transmission saves by skipping SIFS and ACK.
pub const WIFI_FAIL_OVERHEAD: u32 = 6;
/// Mini-slots per LTE-U ON period at the standard 9 us mini-slot.
pub const LTE_SLOTS_PER_ON: u32 = 112;

/// DCF parameters for the LTE-U/WiFi case study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WifiLteConfig {
    /// WiFi node count.
    pub n_w: u32,
    /// Backoff window; the per-attempt mapping is q_c = 2/(cw-1).
    pub cw: u32,
    /// WiFi packet time in mini-slots (successful transmission).
    pub l_w: u32,
    /// LTE-U per-slot transmission probability.
    pub q_l: f64,
    /// Mini-slots per LTE-U ON period.
    pub s: u32,
    /// Mini-slots a failed transmission is shorter by.
    pub fail_overhead: u32,
    /// Draw backoff counters from {0..=cw} (true) or {0..cw} (false).
    pub backoff_inclusive: bool,
}

impl WifiLteConfig {
    pub fn new(n_w: u32, cw: u32, l_w: u32, q_l: f64) -> Result<Self> {
        let cfg = WifiLteConfig {
            n_w,
            cw,
            l_w,
            q_l,
            s: LTE_SLOTS_PER_ON,
            fail_overhead: WIFI_FAIL_OVERHEAD,
            backoff_inclusive: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_w < 1 {
            return Err(Error::InvalidConfig("n_w must be >= 1".into()));
        }
        if self.cw < 3 {
            return Err(Error::InvalidConfig(
                "cw must be >= 3 so that q_c = 2/(cw-1) stays within (0,1]".into(),
            ));
        }
        if self.l_w <= self.fail_overhead {
            return Err(Error::InvalidConfig(format!(
                "l_w must exceed the fail overhead of {} mini-slots",
                self.fail_overhead
            )));
        }
        if self.s < 1 {
            return Err(Error::InvalidConfig("s must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.q_l) || self.q_l.is_nan() {
            return Err(Error::InvalidConfig(format!("q_l must lie in [0,1], got {}", self.q_l)));
        }
        Ok(())
    }

    /// Per-attempt probability implied by the backoff window.
    pub fn q_c(&self) -> f64 {
        2.0 / (self.cw as f64 - 1.0)
    }
}

/// Which system a run simulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SimSystem {
    Generic { system: SystemConfig },
    WifiLte { system: WifiLteConfig },
}

/// One simulation run request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(flatten)]
    pub system: SimSystem,
    /// Total mini-slots simulated.
    pub duration: u64,
    pub seed: u64,
    /// Record per-mini-slot channel occupancy for the first N mini-slots.
    #[serde(default)]
    pub trace_limit: Option<usize>,
    /// Keep all transmission intervals and audit that no successful
    /// transmission overlaps any other. Memory grows with traffic; meant
    /// for short validation runs.
    #[serde(default)]
    pub audit_overlaps: bool,
}

impl SimConfig {
    pub fn generic(system: SystemConfig, duration: u64, seed: u64) -> Result<Self> {
        system.validate()?;
        Self::checked(SimSystem::Generic { system }, duration, seed)
    }

    pub fn wifi_lte(system: WifiLteConfig, duration: u64, seed: u64) -> Result<Self> {
        system.validate()?;
        Self::checked(SimSystem::WifiLte { system }, duration, seed)
    }

    fn checked(system: SimSystem, duration: u64, seed: u64) -> Result<Self> {
        if duration < 1 {
            return Err(Error::InvalidConfig("duration must be >= 1".into()));
        }
        Ok(SimConfig { system, duration, seed, trace_limit: None, audit_overlaps: false })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.system {
            SimSystem::Generic { system } => system.validate()?,
            SimSystem::WifiLte { system } => system.validate()?,
        }
        if self.duration < 1 {
            return Err(Error::InvalidConfig("duration must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable digest of the run parameters, for safe batch merging.
    pub fn digest(&self) -> u64 {
        let payload = serde_json::to_string(self).expect("config serializes");
        fnv1a64(payload.as_bytes())
    }
}

/// Channel occupancy of one mini-slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: u64,
    pub aloha_busy: bool,
    pub csma_busy: bool,
}

/// Counters and empirical rates of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Successful slotted (Aloha / LTE-U) transmissions.
    pub n_success_a: u64,
    /// Successful sensing (CSMA / WiFi) transmissions.
    pub n_success_c: u64,
    pub collisions_a: u64,
    pub collisions_c: u64,
    /// n_success_a * slot-length / duration.
    pub lambda_a_hat: f64,
    /// n_success_c * packet-length / duration.
    pub lambda_c_hat: f64,
    pub idle_fraction: f64,
    pub idle_minislots: u64,
    pub busy_minislots: u64,
    pub duration: u64,
    pub seed: u64,
    pub config_digest: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceEntry>>,
}

impl SimResult {
    pub fn ratio(&self) -> f64 {
        self.lambda_a_hat / self.lambda_c_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxKind {
    Slotted,
    Sensing,
}

#[derive(Debug, Clone, Copy)]
struct ActiveTx {
    kind: TxKind,
    node: u32,
    start: u64,
    /// End of the portion whose corruption shortens the transmission.
    data_end: u64,
    /// Actual end; starts at the clean-completion time and drops to
    /// `data_end` once the data portion is hit.
    end: u64,
    dirty: bool,
}

impl ActiveTx {
    fn hit_at(&mut self, t: u64) {
        self.dirty = true;
        if self.kind == TxKind::Sensing && t < self.data_end {
            self.end = self.data_end;
        }
    }
}

struct EngineParams {
    s: u64,
    n_slotted: u32,
    q_slotted: f64,
    n_sensing: u32,
    attempt: AttemptModel,
    sense_success_len: u64,
    sense_data_len: u64,
}

#[derive(Debug, Clone, Copy)]
enum AttemptModel {
    /// Fresh per-opportunity probability; gaps drawn geometrically.
    Geometric { q: f64 },
    /// Single-stage DCF counter drawn uniformly after each transmission.
    UniformBackoff { cw: u32, inclusive: bool },
}

impl AttemptModel {
    fn draw_gap(&self, rng: &mut ChaCha8Rng) -> Option<u64> {
        match *self {
            AttemptModel::Geometric { q } => {
                if q <= 0.0 {
                    return None;
                }
                if q >= 1.0 {
                    return Some(0);
                }
                let u = 1.0 - rng.random::<f64>();
                Some((u.ln() / (1.0 - q).ln()).min(1e18) as u64)
            }
            AttemptModel::UniformBackoff { cw, inclusive } => {
                let hi = if inclusive { cw } else { cw - 1 };
                Some(u64::from(rng.random_range(0..=hi)))
            }
        }
    }
}

/// Run a single simulation.
pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let params = match &cfg.system {
        SimSystem::Generic { system } => EngineParams {
            s: u64::from(system.s),
            n_slotted: system.n_a,
            q_slotted: system.q_a,
            n_sensing: system.n_c,
            attempt: AttemptModel::Geometric { q: system.q_c },
            sense_success_len: u64::from(system.l_c),
            // the generic model draws no distinction for failed packets
            sense_data_len: u64::from(system.l_c),
        },
        SimSystem::WifiLte { system } => EngineParams {
            s: u64::from(system.s),
            n_slotted: 1,
            q_slotted: system.q_l,
            n_sensing: system.n_w,
            attempt: AttemptModel::UniformBackoff {
                cw: system.cw,
                inclusive: system.backoff_inclusive,
            },
            sense_success_len: u64::from(system.l_w),
            sense_data_len: u64::from(system.l_w - system.fail_overhead),
        },
    };
    Ok(run_engine(cfg, &params))
}

fn run_engine(cfg: &SimConfig, p: &EngineParams) -> SimResult {
    let t_end = cfg.duration;
    let mut slotted_rngs: Vec<ChaCha8Rng> = (0..p.n_slotted)
        .map(|i| node_rng(cfg.seed, u64::from(i)))
        .collect();
    let mut sensing_rngs: Vec<ChaCha8Rng> = (0..p.n_sensing)
        .map(|i| node_rng(cfg.seed, u64::from(p.n_slotted) + u64::from(i)))
        .collect();

    // next-attempt ticks in sense-opportunity space
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    for (i, rng) in sensing_rngs.iter_mut().enumerate() {
        if let Some(gap) = p.attempt.draw_gap(rng) {
            heap.push(Reverse((gap, i as u32)));
        }
    }

    let mut active: Vec<ActiveTx> = Vec::new();
    let mut finished: Vec<ActiveTx> = Vec::new();
    let mut audit_log: Vec<(u64, u64, bool)> = Vec::new();

    let mut n_success_a = 0u64;
    let mut n_success_c = 0u64;
    let mut collisions_a = 0u64;
    let mut collisions_c = 0u64;
    let mut idle_minislots = 0u64;
    let mut tick = 0u64;
    let mut prev_idle = true; // the channel is defined idle before the run
    let mut trace = cfg.trace_limit.map(Vec::with_capacity);

    let finalize = |tx: &ActiveTx,
                        n_success_a: &mut u64,
                        n_success_c: &mut u64,
                        collisions_a: &mut u64,
                        collisions_c: &mut u64,
                        sensing_rngs: &mut [ChaCha8Rng],
                        heap: &mut BinaryHeap<Reverse<(u64, u32)>>,
                        tick: u64,
                        audit_log: &mut Vec<(u64, u64, bool)>,
                        audit: bool| {
        match tx.kind {
            TxKind::Slotted => {
                if tx.dirty {
                    *collisions_a += 1;
                } else {
                    *n_success_a += 1;
                }
            }
            TxKind::Sensing => {
                if tx.dirty {
                    *collisions_c += 1;
                } else {
                    *n_success_c += 1;
                }
                let rng = &mut sensing_rngs[tx.node as usize];
                if let Some(gap) = AttemptModel::draw_gap(&p.attempt, rng) {
                    heap.push(Reverse((tick + gap, tx.node)));
                }
            }
        }
        if audit {
            audit_log.push((tx.start, tx.end, !tx.dirty));
        }
    };

    let mut new_txs: Vec<ActiveTx> = Vec::new();
    for t in 0..t_end {
        // retire transmissions that ended by t
        if !active.is_empty() {
            let mut i = 0;
            while i < active.len() {
                if active[i].end <= t {
                    finished.push(active.swap_remove(i));
                } else {
                    i += 1;
                }
            }
            for tx in finished.drain(..) {
                finalize(
                    &tx,
                    &mut n_success_a,
                    &mut n_success_c,
                    &mut collisions_a,
                    &mut collisions_c,
                    &mut sensing_rngs,
                    &mut heap,
                    tick,
                    &mut audit_log,
                    cfg.audit_overlaps,
                );
            }
        }

        new_txs.clear();

        // slotted transmitters fire at boundaries without sensing
        if t % p.s == 0 {
            for (i, rng) in slotted_rngs.iter_mut().enumerate() {
                if rng.random::<f64>() < p.q_slotted {
                    new_txs.push(ActiveTx {
                        kind: TxKind::Slotted,
                        node: i as u32,
                        start: t,
                        data_end: t + p.s,
                        end: t + p.s,
                        dirty: false,
                    });
                }
            }
        }

        // sensing transmitters act only after an idle mini-slot
        if prev_idle {
            let this_tick = tick;
            tick += 1;
            while let Some(&Reverse((at, node))) = heap.peek() {
                if at > this_tick {
                    break;
                }
                heap.pop();
                new_txs.push(ActiveTx {
                    kind: TxKind::Sensing,
                    node,
                    start: t,
                    data_end: t + p.sense_data_len,
                    end: t + p.sense_success_len,
                    dirty: false,
                });
            }
        }

        if !new_txs.is_empty() {
            let born_dirty = !active.is_empty() || new_txs.len() > 1;
            for tx in active.iter_mut() {
                tx.hit_at(t);
            }
            for tx in new_txs.iter_mut() {
                if born_dirty {
                    tx.hit_at(t);
                }
            }
            active.append(&mut new_txs);
        }

        let busy_now = !active.is_empty();
        if !busy_now {
            idle_minislots += 1;
        }
        if let Some(tr) = trace.as_mut() {
            if tr.len() < cfg.trace_limit.unwrap_or(0) {
                tr.push(TraceEntry {
                    t,
                    aloha_busy: active.iter().any(|x| x.kind == TxKind::Slotted),
                    csma_busy: active.iter().any(|x| x.kind == TxKind::Sensing),
                });
            }
        }
        prev_idle = !busy_now;
    }

    // transmissions completing exactly at the horizon still count; anything
    // running past it is dropped from both buckets
    for tx in active.drain(..) {
        if tx.end <= t_end {
            finalize(
                &tx,
                &mut n_success_a,
                &mut n_success_c,
                &mut collisions_a,
                &mut collisions_c,
                &mut sensing_rngs,
                &mut heap,
                tick,
                &mut audit_log,
                cfg.audit_overlaps,
            );
        }
    }

    if cfg.audit_overlaps {
        audit_no_success_overlap(&audit_log);
    }

    let t = cfg.duration as f64;
    SimResult {
        n_success_a,
        n_success_c,
        collisions_a,
        collisions_c,
        lambda_a_hat: n_success_a as f64 * p.s as f64 / t,
        lambda_c_hat: n_success_c as f64 * p.sense_success_len as f64 / t,
        idle_fraction: idle_minislots as f64 / t,
        idle_minislots,
        busy_minislots: cfg.duration - idle_minislots,
        duration: cfg.duration,
        seed: cfg.seed,
        config_digest: cfg.digest(),
        trace,
    }
}

fn audit_no_success_overlap(log: &[(u64, u64, bool)]) {
    for (i, &(s1, e1, ok1)) in log.iter().enumerate() {
        if !ok1 {
            continue;
        }
        for &(s2, e2, _) in &log[i + 1..] {
            assert!(
                e1 <= s2 || e2 <= s1,
                "successful transmission [{s1},{e1}) overlaps [{s2},{e2})"
            );
        }
    }
}

fn node_rng(seed: u64, node: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node + 1);
    rng
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Independent runs in input order; per-item failures do not abort the
/// batch.
pub fn run_batch(cfgs: &[SimConfig]) -> Vec<Result<SimResult>> {
    cfgs.par_iter().map(run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic(q_a: f64, q_c: f64, s: u32, l_c: u32, t: u64, seed: u64) -> SimConfig {
        let sys = SystemConfig::new(3, 3, q_a, q_c, s, l_c).unwrap();
        SimConfig::generic(sys, t, seed).unwrap()
    }

    #[test]
    fn silent_network_stays_idle() {
        let res = run(&generic(0.0, 0.0, 4, 2, 10_000, 7)).unwrap();
        assert_eq!(res.n_success_a + res.n_success_c, 0);
        assert_eq!(res.collisions_a + res.collisions_c, 0);
        assert_eq!(res.idle_fraction, 1.0);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let cfg = generic(0.2, 0.1, 4, 3, 50_000, 99);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = run(&generic(0.2, 0.1, 4, 3, 50_000, 1)).unwrap();
        let b = run(&generic(0.2, 0.1, 4, 3, 50_000, 2)).unwrap();
        assert_ne!((a.n_success_a, a.n_success_c), (b.n_success_a, b.n_success_c));
    }

    #[test]
    fn minislot_accounting_is_exact() {
        for seed in 0..5 {
            let res = run(&generic(0.3, 0.2, 5, 7, 12_345, seed)).unwrap();
            assert_eq!(res.busy_minislots + res.idle_minislots, res.duration);
            assert!(res.lambda_a_hat + res.lambda_c_hat + res.idle_fraction <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn audit_passes_on_busy_config() {
        let mut cfg = generic(0.4, 0.3, 4, 6, 20_000, 3);
        cfg.audit_overlaps = true;
        run(&cfg).unwrap();
    }

    #[test]
    fn trace_is_bounded_and_covers_the_prefix() {
        let mut cfg = generic(0.5, 0.5, 4, 2, 1_000, 11);
        cfg.trace_limit = Some(64);
        let res = run(&cfg).unwrap();
        let trace = res.trace.unwrap();
        assert_eq!(trace.len(), 64);
        for (i, e) in trace.iter().enumerate() {
            assert_eq!(e.t, i as u64);
        }
        assert!(trace.iter().any(|e| e.aloha_busy || e.csma_busy));
    }

    #[test]
    fn batch_preserves_order_and_determinism() {
        let cfgs = vec![generic(0.2, 0.1, 4, 3, 10_000, 5), generic(0.2, 0.1, 4, 3, 10_000, 6)];
        let first = run_batch(&cfgs);
        let second = run_batch(&cfgs);
        assert!(run_batch(&[]).is_empty());
        for (x, y) in first.iter().zip(&second) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }

    #[test]
    fn wifi_lte_smoke() {
        let sys = WifiLteConfig::new(5, 64, 100, 0.3).unwrap();
        let cfg = SimConfig::wifi_lte(sys, 200_000, 42).unwrap();
        let res = run(&cfg).unwrap();
        assert!(res.n_success_a > 0);
        assert!(res.n_success_c > 0);
        assert_eq!(res.busy_minislots + res.idle_minislots, res.duration);
    }

    #[test]
    fn rejects_small_backoff_window() {
        assert!(WifiLteConfig::new(5, 2, 100, 0.3).is_err());
    }
}

//! Exact representation of the dual-channel Markov renewal process: state
//! enumeration, transition probabilities, holding times, stationary and
//! limiting distributions, and the busy-to-idle probability transformations.
//!
//! States carry the status of the Aloha channel, the status of the CSMA
//! channel, and the offset `d` between the initiation of the current CSMA
//! channel state and the current Aloha channel state, in mini-slots. Idle
//! CSMA states last one mini-slot and store `d` as the phase within the
//! slot; busy CSMA states may start mid-slot or spill over from earlier
//! slots, so `d` ranges over `-(l_c-1)..=s-1`.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{stationary_distribution, stationary_residual, DMat};

/// Occupancy of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelStatus {
    Idle,
    Busy,
}

impl std::fmt::Display for ChannelStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelStatus::Idle => write!(f, "I"),
            ChannelStatus::Busy => write!(f, "B"),
        }
    }
}

/// One state of the dual-channel renewal process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub aloha: ChannelStatus,
    pub csma: ChannelStatus,
    pub d: i64,
}

impl ChainState {
    pub fn new(aloha: ChannelStatus, csma: ChannelStatus, d: i64) -> Self {
        ChainState { aloha, csma, d }
    }

    pub fn idle_both(d: i64) -> Self {
        ChainState::new(ChannelStatus::Idle, ChannelStatus::Idle, d)
    }

    fn check_range(&self, cfg: &SystemConfig) -> Result<()> {
        let s = cfg.s as i64;
        let l_c = cfg.l_c as i64;
        let (lo, hi, class) = match self.csma {
            ChannelStatus::Idle => (0, s - 1, "idle-CSMA state"),
            ChannelStatus::Busy => (-(l_c - 1), s - 1, "busy-CSMA state"),
        };
        if self.d < lo || self.d > hi {
            return Err(Error::OffsetOutOfRange { class, d: self.d, lo, hi });
        }
        Ok(())
    }
}

impl std::fmt::Display for ChainState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.aloha, self.csma, self.d)
    }
}

/// Holding time of a state in mini-slots.
///
/// Idle-CSMA states last one mini-slot. A busy-CSMA state lasts from its
/// entry epoch, `max(0, d)` relative to the slot start, until the next
/// change on either channel: the end of the CSMA packet at `d + l_c` or the
/// slot boundary at `s`, whichever comes first.
pub fn holding_time(state: &ChainState, cfg: &SystemConfig) -> Result<u32> {
    state.check_range(cfg)?;
    match state.csma {
        ChannelStatus::Idle => Ok(1),
        ChannelStatus::Busy => {
            let s = cfg.s as i64;
            let end = state.d + cfg.l_c as i64;
            let tau = end.min(s) - state.d.max(0);
            debug_assert!(tau >= 1);
            Ok(tau as u32)
        }
    }
}

/// Enumerated state space with transitions and both distributions.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedChain {
    /// Reachable states in canonical order.
    pub states: Vec<ChainState>,
    /// Row-stochastic transition matrix over `states`.
    pub p: DMat,
    /// Holding time per state in mini-slots.
    pub tau: Vec<u32>,
    /// Stationary distribution of the embedded chain.
    pub pi: Vec<f64>,
    /// Limiting (time-fraction) distribution of the renewal process.
    pub pi_tilde: Vec<f64>,
    #[serde(skip)]
    index: HashMap<ChainState, usize>,
}

/// Default cap on the reachable state count, as a multiple of the natural
/// state-space size.
pub fn default_state_cap(cfg: &SystemConfig) -> usize {
    10 * cfg.s as usize * (cfg.s as usize + cfg.l_c as usize)
}

impl EmbeddedChain {
    pub fn index_of(&self, state: &ChainState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Limiting probability of a state; unreachable states have measure zero.
    pub fn pi_tilde_of(&self, state: &ChainState) -> f64 {
        self.index_of(state).map_or(0.0, |i| self.pi_tilde[i])
    }

    /// Embedded stationary probability of a state.
    pub fn pi_of(&self, state: &ChainState) -> f64 {
        self.index_of(state).map_or(0.0, |i| self.pi[i])
    }

    /// Sum of limiting probabilities of the idle states, i.e. the long-run
    /// fraction of time the coexisting network is idle.
    pub fn alpha_c(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.pi_tilde)
            .filter(|(st, _)| st.aloha == ChannelStatus::Idle && st.csma == ChannelStatus::Idle)
            .map(|(_, p)| p)
            .sum()
    }

    /// Normalizing constant of the limiting distribution: sum of pi * tau.
    pub fn mean_holding(&self) -> f64 {
        self.pi.iter().zip(&self.tau).map(|(p, t)| p * f64::from(*t)).sum()
    }
}

/// Successor states of `state` with their transition probabilities.
///
/// At the end of the holding time the next epoch is examined: if it is a
/// slot boundary the Aloha channel redraws (busy with probability
/// 1 - rho_a); the CSMA channel starts a packet with probability 1 - rho_c
/// only when the immediately preceding mini-slot was idle on both channels.
/// Zero-probability arcs are omitted so reachability reflects the actual
/// support.
pub fn transitions_from(state: &ChainState, cfg: &SystemConfig) -> Result<Vec<(ChainState, f64)>> {
    use ChannelStatus::{Busy, Idle};
    state.check_range(cfg)?;
    let s = cfg.s as i64;
    let l_c = cfg.l_c as i64;
    let rho_a = cfg.rho_a();
    let rho_c = cfg.rho_c();
    let mut out = Vec::with_capacity(4);
    let mut push = |st: ChainState, p: f64| {
        if p > 0.0 {
            out.push((st, p));
        }
    };
    // Aloha draw at a slot boundary: (status, probability)
    let aloha_draw = [(Idle, rho_a), (Busy, 1.0 - rho_a)];
    match state.csma {
        Idle => {
            let can_start = state.aloha == Idle;
            if state.d < s - 1 {
                // mid-slot: the Aloha state persists
                let d2 = state.d + 1;
                if can_start {
                    push(ChainState::new(state.aloha, Busy, d2), 1.0 - rho_c);
                    push(ChainState::new(state.aloha, Idle, d2), rho_c);
                } else {
                    push(ChainState::new(state.aloha, Idle, d2), 1.0);
                }
            } else {
                // slot boundary: Aloha redraws; CSMA may start at the
                // boundary only if the closing mini-slot was idle on both
                // channels
                for (a2, pa) in aloha_draw {
                    if can_start {
                        push(ChainState::new(a2, Busy, 0), pa * (1.0 - rho_c));
                        push(ChainState::new(a2, Idle, 0), pa * rho_c);
                    } else {
                        push(ChainState::new(a2, Idle, 0), pa);
                    }
                }
            }
        }
        Busy => {
            let end = state.d + l_c;
            if end < s {
                // packet ends mid-slot; the next mini-slot was sensed busy,
                // so the CSMA channel is idle with certainty
                push(ChainState::new(state.aloha, Idle, end), 1.0);
            } else if end > s {
                // packet continues across the boundary
                for (a2, pa) in aloha_draw {
                    push(ChainState::new(a2, Busy, state.d - s), pa);
                }
            } else {
                // packet ends exactly at the boundary
                for (a2, pa) in aloha_draw {
                    push(ChainState::new(a2, Idle, 0), pa);
                }
            }
        }
    }
    Ok(out)
}

/// Enumerate the reachable chain and solve for both distributions.
pub fn enumerate_chain(cfg: &SystemConfig) -> Result<EmbeddedChain> {
    enumerate_chain_with_cap(cfg, default_state_cap(cfg))
}

/// As [`enumerate_chain`] with an explicit cap on the reachable state count.
pub fn enumerate_chain_with_cap(cfg: &SystemConfig, cap: usize) -> Result<EmbeddedChain> {
    cfg.validate()?;
    // (I,I,0) is recurrent whenever an idle slot has positive probability;
    // otherwise every slot is Aloha-busy and (B,I,0) is.
    let start = if cfg.rho_a() > 0.0 {
        ChainState::idle_both(0)
    } else {
        ChainState::new(ChannelStatus::Busy, ChannelStatus::Idle, 0)
    };

    let mut discovered: HashMap<ChainState, Vec<(ChainState, f64)>> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    discovered.insert(start, transitions_from(&start, cfg)?);
    while let Some(st) = queue.pop_front() {
        let succs = discovered[&st].clone();
        for (next, _) in succs {
            if !discovered.contains_key(&next) {
                if discovered.len() >= cap {
                    return Err(Error::StateCapExceeded { count: discovered.len() + 1, cap });
                }
                discovered.insert(next, transitions_from(&next, cfg)?);
                queue.push_back(next);
            }
        }
    }

    let mut states: Vec<ChainState> = discovered.keys().copied().collect();
    states.sort();
    let index: HashMap<ChainState, usize> =
        states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let n = states.len();

    let mut p = DMat::zeros(n, n);
    for (st, succs) in &discovered {
        let i = index[st];
        for (next, prob) in succs {
            p[(i, index[next])] += prob;
        }
    }

    check_irreducible(&states, &p, index[&start])?;

    let tau: Vec<u32> = states.iter().map(|s| holding_time(s, cfg)).collect::<Result<_>>()?;
    let pi = stationary_distribution(&p).map_err(|_| Error::NotIrreducible {
        detail: "stationary solve was singular on the reachable set".into(),
    })?;
    let residual = stationary_residual(&p, &pi);
    if residual > 1e-12 {
        return Err(Error::ConsistencyMismatch {
            context: "stationary residual".into(),
            got: residual,
            want: 0.0,
            diff: residual,
            tol: 1e-12,
        });
    }
    let pi_tilde = limiting_distribution(&pi, &tau);
    Ok(EmbeddedChain { states, p, tau, pi, pi_tilde, index })
}

/// Limiting probabilities from the embedded stationary distribution: each
/// state weighted by its holding time and renormalized.
pub fn limiting_distribution(pi: &[f64], tau: &[u32]) -> Vec<f64> {
    let z: f64 = pi.iter().zip(tau).map(|(p, t)| p * f64::from(*t)).sum();
    pi.iter().zip(tau).map(|(p, t)| p * f64::from(*t) / z).collect()
}

/// Every reachable state must also reach the start state, otherwise the
/// generative rule produced transient garbage.
fn check_irreducible(states: &[ChainState], p: &DMat, start: usize) -> Result<()> {
    let n = states.len();
    // reverse reachability from the start state
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && p[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    if let Some(i) = seen.iter().position(|ok| !ok) {
        return Err(Error::NotIrreducible {
            detail: format!("state {} cannot return to {}", states[i], states[start]),
        });
    }
    Ok(())
}

/// Busy-state probabilities reconstructed from idle-state probabilities.
///
/// The embedded probabilities of CSMA-busy states follow from the idle
/// states via the sensing mechanism, and the limiting probabilities of
/// Aloha-busy/CSMA-idle states follow from the per-phase time budget: each
/// phase k owns a fraction `a` of time, split between the idle state, busy
/// states whose span covers k, and the (B,I,k) state.
#[derive(Debug, Clone, Serialize)]
pub struct BusyFromIdle {
    /// Embedded probabilities of `(I,B,d)` and `(B,B,d)` states, in chain
    /// state order, derived from idle-state probabilities.
    pub embedded_busy: HashMap<String, f64>,
    /// Limiting probabilities of `(B,I,k)` for phases k = 0..s-1 from the
    /// phase-sum identity.
    pub pi_tilde_aloha_busy: Vec<f64>,
    /// Largest relative deviation against the directly solved chain.
    pub max_deviation: f64,
}

/// Wrap a non-positive offset into the phase of the idle state that fed the
/// transmission: the packet started right after an idle mini-slot at phase
/// `(d - 1) mod s`.
pub fn feeding_phase(d: i64, s: u32) -> usize {
    (d - 1).rem_euclid(s as i64) as usize
}

/// Embedded busy-state probability as a multiple of embedded idle-state
/// probabilities. Returns the coefficient and the idle phase it applies to,
/// or `None` for unreachable combinations.
pub fn busy_embedded_coefficient(
    aloha: ChannelStatus,
    d: i64,
    rho_a: f64,
    rho_c: f64,
    s: u32,
) -> Option<(f64, usize)> {
    use ChannelStatus::{Busy, Idle};
    match (aloha, d) {
        // mid-slot start requires an idle Aloha channel at the start
        (Idle, d) if d > 0 => Some(((1.0 - rho_c), d as usize - 1)),
        (Busy, d) if d > 0 => None,
        // boundary start or spill-over: the feeding idle mini-slot is the
        // last one before the most recent boundary, and the Aloha channel
        // redrew at every boundary crossed since
        (Idle, d) => Some((rho_a * (1.0 - rho_c), feeding_phase(d, s))),
        (Busy, d) => Some(((1.0 - rho_a) * (1.0 - rho_c), feeding_phase(d, s))),
    }
}

/// Reconstruct busy-state probabilities from the idle states of a solved
/// chain and verify them against the direct solution.
pub fn busy_from_idle(chain: &EmbeddedChain, cfg: &SystemConfig) -> Result<BusyFromIdle> {
    use ChannelStatus::{Busy, Idle};
    let tol = 1e-10;
    let rho_a = cfg.rho_a();
    let rho_c = cfg.rho_c();
    let s = cfg.s;
    let z = chain.mean_holding();

    // embedded idle probabilities per phase
    let mut pi_idle = vec![0.0; s as usize];
    for (st, p) in chain.states.iter().zip(&chain.pi) {
        if st.aloha == Idle && st.csma == Idle {
            pi_idle[st.d as usize] = *p;
        }
    }

    let mut embedded_busy = HashMap::new();
    let mut max_dev: f64 = 0.0;
    let mut check = |context: String, got: f64, want: f64| -> Result<()> {
        let diff = (got - want).abs();
        max_dev = max_dev.max(diff);
        if diff > tol {
            return Err(Error::ConsistencyMismatch { context, got, want, diff, tol });
        }
        Ok(())
    };

    for st in &chain.states {
        if st.csma != Busy {
            continue;
        }
        let (coeff, phase) = busy_embedded_coefficient(st.aloha, st.d, rho_a, rho_c, s)
            .expect("reachable busy state must have a feeding idle state");
        let derived = coeff * pi_idle[phase];
        check(format!("embedded probability of {st}"), derived, chain.pi_of(st))?;
        embedded_busy.insert(st.to_string(), derived);
    }
    // states the chain never reached must carry no derived mass
    for d in -(cfg.l_c as i64 - 1)..cfg.s as i64 {
        for aloha in [Idle, Busy] {
            let st = ChainState::new(aloha, Busy, d);
            if chain.index_of(&st).is_some() {
                continue;
            }
            let derived = busy_embedded_coefficient(aloha, d, rho_a, rho_c, s)
                .map_or(0.0, |(c, phase)| c * pi_idle[phase]);
            check(format!("embedded probability of unreachable {st}"), derived, 0.0)?;
        }
    }

    // phase-sum identity: pi~(B,I,k) = a - pi~(I,I,k) - sum of busy mass at
    // phase k, where a busy state spends 1/tau of its time in each phase of
    // its span, so its phase share is pi(state)/Z.
    let a = cfg.a();
    let mut pi_tilde_aloha_busy = vec![0.0; s as usize];
    for k in 0..s as i64 {
        let idle = chain.pi_tilde_of(&ChainState::idle_both(k));
        let mut busy_share = 0.0;
        for (st, pi) in chain.states.iter().zip(&chain.pi) {
            if st.csma != Busy {
                continue;
            }
            let span_lo = st.d.max(0);
            let span_hi = (st.d + cfg.l_c as i64).min(s as i64);
            if (span_lo..span_hi).contains(&k) {
                busy_share += pi / z;
            }
        }
        let derived = a - idle - busy_share;
        let direct = chain.pi_tilde_of(&ChainState::new(Busy, Idle, k));
        check(format!("phase-sum probability of (B,I,{k})"), derived, direct)?;
        pi_tilde_aloha_busy[k as usize] = derived;
    }

    Ok(BusyFromIdle { embedded_busy, pi_tilde_aloha_busy, max_deviation: max_dev })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_rho(rho_a: f64, rho_c: f64, s: u32, l_c: u32) -> SystemConfig {
        SystemConfig::from_rho(1, 1, rho_a, rho_c, s, l_c).unwrap()
    }

    #[test]
    fn holding_time_idle_is_one() {
        let cfg = cfg_rho(0.5, 0.5, 4, 2);
        let st = ChainState::idle_both(3);
        assert_eq!(holding_time(&st, &cfg).unwrap(), 1);
    }

    #[test]
    fn holding_time_busy_near_boundary() {
        // d > s - l_c: the slot boundary cuts the state short
        let cfg = cfg_rho(0.5, 0.5, 4, 2);
        let st = ChainState::new(ChannelStatus::Idle, ChannelStatus::Busy, 3);
        assert_eq!(holding_time(&st, &cfg).unwrap(), 1);
    }

    #[test]
    fn holding_time_long_packet_spillover() {
        // l_c > s and s - l_c <= d < 0 gives a full slot
        let cfg = cfg_rho(0.5, 0.5, 4, 6);
        let st = ChainState::new(ChannelStatus::Idle, ChannelStatus::Busy, -1);
        assert_eq!(holding_time(&st, &cfg).unwrap(), 4);
    }

    #[test]
    fn holding_time_rejects_out_of_range_offset() {
        let cfg = cfg_rho(0.5, 0.5, 4, 2);
        let st = ChainState::new(ChannelStatus::Idle, ChannelStatus::Busy, -2);
        assert!(holding_time(&st, &cfg).is_err());
        let st = ChainState::idle_both(4);
        assert!(holding_time(&st, &cfg).is_err());
    }

    #[test]
    fn first_idle_transition_is_rho_c() {
        let cfg = cfg_rho(0.5, 0.5, 2, 2);
        let succs = transitions_from(&ChainState::idle_both(0), &cfg).unwrap();
        let p = succs
            .iter()
            .find(|(st, _)| *st == ChainState::idle_both(1))
            .map(|(_, p)| *p)
            .unwrap();
        assert!((p - cfg.rho_c()).abs() < 1e-15);
    }

    #[test]
    fn silent_network_reduces_to_idle_cycle() {
        let cfg = SystemConfig::new(3, 3, 0.0, 0.0, 4, 2).unwrap();
        let chain = enumerate_chain(&cfg).unwrap();
        assert_eq!(chain.states.len(), 4);
        for (i, st) in chain.states.iter().enumerate() {
            assert_eq!(*st, ChainState::idle_both(i as i64));
            let next = ChainState::idle_both((i as i64 + 1) % 4);
            assert!((chain.p[(i, chain.index_of(&next).unwrap())] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn chain_rows_are_stochastic() {
        let cfg = cfg_rho(0.5, 0.5, 4, 5);
        let chain = enumerate_chain(&cfg).unwrap();
        for i in 0..chain.states.len() {
            let sum: f64 = chain.p.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
        }
        let total: f64 = chain.pi_tilde.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limiting_is_holding_time_weighted() {
        let pi = vec![0.5, 0.5];
        let tau = vec![1, 3];
        let lt = limiting_distribution(&pi, &tau);
        assert!((lt[0] - 0.25).abs() < 1e-15);
        assert!((lt[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn busy_states_with_positive_offset_require_idle_aloha() {
        let cfg = cfg_rho(0.5, 0.5, 4, 5);
        let chain = enumerate_chain(&cfg).unwrap();
        for st in &chain.states {
            if st.csma == ChannelStatus::Busy && st.d > 0 {
                assert_eq!(st.aloha, ChannelStatus::Idle, "unexpected state {st}");
            }
        }
    }

    #[test]
    fn appendix_relations_hold_on_fig6_instance() {
        let cfg = cfg_rho(0.5, 0.5, 2, 2);
        let chain = enumerate_chain(&cfg).unwrap();
        let res = busy_from_idle(&chain, &cfg).unwrap();
        assert!(res.max_deviation < 1e-10);
    }

    #[test]
    fn no_csma_traffic_leaves_no_busy_states() {
        let cfg = SystemConfig::new(2, 2, 0.3, 0.0, 4, 2).unwrap();
        let chain = enumerate_chain(&cfg).unwrap();
        assert!(chain.states.iter().all(|st| st.csma == ChannelStatus::Idle));
        let res = busy_from_idle(&chain, &cfg).unwrap();
        assert!(res.embedded_busy.is_empty());
    }
}

//! Scenario configuration and the per-attempt rate quantities derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full parameterization of one coexistence scenario.
///
/// Time is measured in mini-slots. One time slot (the Aloha packet
/// transmission time) spans `s` mini-slots, so the mini-slot ratio is
/// `a = 1/s`. A CSMA packet occupies `l_c` mini-slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of Aloha nodes.
    pub n_a: u32,
    /// Number of CSMA nodes.
    pub n_c: u32,
    /// Per-slot transmission probability of each Aloha node.
    pub q_a: f64,
    /// Per-mini-slot transmission probability of each CSMA node after idle
    /// sensing.
    pub q_c: f64,
    /// Mini-slots per time slot (1/a).
    pub s: u32,
    /// CSMA packet transmission time in mini-slots.
    pub l_c: u32,
}

impl SystemConfig {
    pub fn new(n_a: u32, n_c: u32, q_a: f64, q_c: f64, s: u32, l_c: u32) -> Result<Self> {
        let cfg = Self { n_a, n_c, q_a, q_c, s, l_c };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build a config from no-transmission probabilities instead of
    /// per-node ones, inverting `rho = (1-q)^n` as `q = 1 - rho^(1/n)`.
    pub fn from_rho(n_a: u32, n_c: u32, rho_a: f64, rho_c: f64, s: u32, l_c: u32) -> Result<Self> {
        let q_a = q_from_rho(rho_a, n_a, "rho_a")?;
        let q_c = q_from_rho(rho_c, n_c, "rho_c")?;
        Self::new(n_a, n_c, q_a, q_c, s, l_c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 1 {
            return Err(Error::InvalidConfig("s must be >= 1".into()));
        }
        if self.l_c < 1 {
            return Err(Error::InvalidConfig("l_c must be >= 1".into()));
        }
        if self.n_a + self.n_c < 1 {
            return Err(Error::InvalidConfig(
                "at least one node of either kind is required".into(),
            ));
        }
        for (name, q) in [("q_a", self.q_a), ("q_c", self.q_c)] {
            if !(0.0..=1.0).contains(&q) || q.is_nan() {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {q}")));
            }
        }
        Ok(())
    }

    /// Probability that no Aloha node transmits at a slot start.
    pub fn rho_a(&self) -> f64 {
        (1.0 - self.q_a).powi(self.n_a as i32)
    }

    /// Probability that no CSMA node transmits after sensing an idle
    /// mini-slot.
    pub fn rho_c(&self) -> f64 {
        (1.0 - self.q_c).powi(self.n_c as i32)
    }

    /// True when the CSMA packet time is a whole number of time slots.
    pub fn is_integer_multiple(&self) -> bool {
        self.l_c.is_multiple_of(self.s)
    }

    /// Mini-slot ratio `a = 1/s`.
    pub fn a(&self) -> f64 {
        1.0 / self.s as f64
    }

    pub fn derive_rates(&self) -> DerivedRates {
        DerivedRates::from_config(self)
    }
}

/// Invert `rho = (1-q)^n` to a per-node probability.
pub fn q_from_rho(rho: f64, n: u32, name: &str) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {rho}")));
    }
    if n == 0 {
        if rho == 1.0 {
            // zero nodes never transmit regardless of q
            return Ok(0.0);
        }
        return Err(Error::InvalidConfig(format!(
            "{name} = {rho} cannot be realized with zero nodes"
        )));
    }
    Ok(1.0 - rho.powf(1.0 / n as f64))
}

/// Aggregate rates used throughout the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    /// (1-q_a)^n_a
    pub rho_a: f64,
    /// (1-q_c)^n_c
    pub rho_c: f64,
    /// (rho_a + rho_c - rho_a*rho_c)^s
    pub phi: f64,
    /// rho_c + rho_a - rho_c*rho_a, the per-mini-slot idle decay factor
    pub f: f64,
}

impl DerivedRates {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let rho_a = cfg.rho_a();
        let rho_c = cfg.rho_c();
        Self::from_rho(rho_a, rho_c, cfg.s)
    }

    pub fn from_rho(rho_a: f64, rho_c: f64, s: u32) -> Self {
        let f = rho_c + rho_a - rho_c * rho_a;
        DerivedRates { rho_a, rho_c, phi: f.powi(s as i32), f }
    }
}

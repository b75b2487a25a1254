//! LTE-U/WiFi deployment layer: maps the abstract optimum onto 802.11
//! backoff windows and LTE-U duty-cycle probabilities, and sweeps the
//! robustness of a fixed configuration against parameter drift.

use serde::{Deserialize, Serialize};

use crate::analytic::{throughput_report_scn, Scenario, ThroughputReport};
use crate::error::Result;
use crate::optimizer::{optimize, OptimizationResult, OptimizationSpec};
use crate::sim::{run, SimConfig, WifiLteConfig, LTE_SLOTS_PER_ON};

/// What a deployment needs to know before configuring itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentInput {
    pub n_w: u32,
    /// Agreed throughput proportion lambda_lte / lambda_wifi.
    pub gamma: f64,
    /// Mini-slots per LTE-U ON period.
    pub s: u32,
    /// Upper bound on the WiFi packet time to search.
    pub l_w_max: u32,
}

impl DeploymentInput {
    pub fn new(n_w: u32, gamma: f64) -> Self {
        DeploymentInput { n_w, gamma, s: LTE_SLOTS_PER_ON, l_w_max: LTE_SLOTS_PER_ON }
    }
}

/// Concrete radio configuration derived from the optimizer output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub input: DeploymentInput,
    pub cw_opt: u32,
    pub q_l_opt: f64,
    pub l_w_opt: u32,
    /// Analytic prediction at the mapped (rounded) parameters, not the
    /// continuous optimum.
    pub predicted: ThroughputReport,
    pub optimum: OptimizationResult,
}

impl DeploymentConfig {
    /// Per-attempt probability implied by the rounded backoff window.
    pub fn q_c_implied(&self) -> f64 {
        2.0 / (self.cw_opt as f64 - 1.0)
    }

    /// Collective WiFi silence probability implied by the rounded window.
    pub fn rho_c_implied(&self) -> f64 {
        (1.0 - self.q_c_implied()).powi(self.input.n_w as i32)
    }

    /// Simulator parameter block with the configured packet time.
    pub fn wifi_config(&self, l_w: u32) -> Result<WifiLteConfig> {
        let mut cfg = WifiLteConfig::new(self.input.n_w, self.cw_opt, l_w, self.q_l_opt)?;
        cfg.s = self.input.s;
        Ok(cfg)
    }
}

/// Optimal backoff window for a target silence probability.
pub fn cw_from_rho_c(rho_c: f64, n_w: u32) -> u32 {
    (2.0 / (1.0 - rho_c.powf(1.0 / n_w as f64)) + 1.0).ceil() as u32
}

/// Run the optimizer with one Aloha node standing in for the LTE-U eNB and
/// map the optimum onto DCF and duty-cycle parameters.
pub fn derive_deployment(input: &DeploymentInput) -> Result<DeploymentConfig> {
    // the coarse grid only locates the basin; the polish stage inside
    // `optimize` pins the optimum, so a 1e-2 sweep keeps the per-packet-time
    // search affordable at the case-study slot size
    let spec = OptimizationSpec::new(input.gamma, 1, input.n_w, input.s)?
        .with_candidates((1..=input.l_w_max).collect())
        .with_rho_a_step(1e-2);
    let optimum = optimize(&spec)?;
    let cw_opt = cw_from_rho_c(optimum.rho_c_opt, input.n_w);
    let q_l_opt = 1.0 - optimum.rho_a_opt;
    let l_w_opt = optimum.l_c_opt;
    // prediction at the parameters the radios will actually use
    let q_c = 2.0 / (cw_opt as f64 - 1.0);
    let rho_c = (1.0 - q_c).powi(input.n_w as i32);
    let scn = Scenario::from_rho(1, input.n_w, input.s, l_w_opt, optimum.rho_a_opt, rho_c)?;
    let predicted = throughput_report_scn(&scn)?;
    Ok(DeploymentConfig { input: *input, cw_opt, q_l_opt, l_w_opt, predicted, optimum })
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// The swept quantity (actual packet time, true node count, ...).
    pub parameter: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub lambda_total: f64,
    /// lambda_a / lambda_c.
    pub ratio: f64,
    pub method: String,
    pub seed: Option<u64>,
}

/// Fixed CSV column order shared by all sweep emitters.
pub const SWEEP_COLUMNS: [&str; 7] =
    ["parameter", "lambda_A", "lambda_C", "lambda_total", "ratio", "method", "seed"];

fn sim_row(parameter: f64, cfg: &SimConfig) -> Result<SweepRow> {
    let res = run(cfg)?;
    Ok(SweepRow {
        parameter,
        lambda_a: res.lambda_a_hat,
        lambda_c: res.lambda_c_hat,
        lambda_total: res.lambda_a_hat + res.lambda_c_hat,
        ratio: res.lambda_a_hat / res.lambda_c_hat,
        method: "simulation".to_string(),
        seed: Some(cfg.seed),
    })
}

fn analytic_row(parameter: f64, scn: &Scenario) -> Result<SweepRow> {
    let rep = throughput_report_scn(scn)?;
    Ok(SweepRow {
        parameter,
        lambda_a: rep.lambda_a,
        lambda_c: rep.lambda_c,
        lambda_total: rep.lambda_total,
        ratio: rep.lambda_a / rep.lambda_c,
        method: "analytic".to_string(),
        seed: None,
    })
}

/// Hold the optimal access parameters fixed and let the actual WiFi packet
/// time deviate. Each point is simulated and also evaluated analytically.
pub fn robustness_lw(
    config: &DeploymentConfig,
    l_w_actual: &[u32],
    duration: u64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(l_w_actual.len() * 2);
    for (i, &l_w) in l_w_actual.iter().enumerate() {
        let sim_cfg = SimConfig::wifi_lte(config.wifi_config(l_w)?, duration, seed + i as u64)?;
        rows.push(sim_row(f64::from(l_w), &sim_cfg)?);
        let scn = Scenario::from_rho(
            1,
            config.input.n_w,
            config.input.s,
            l_w,
            1.0 - config.q_l_opt,
            config.rho_c_implied(),
        )?;
        rows.push(analytic_row(f64::from(l_w), &scn)?);
    }
    Ok(rows)
}

/// Keep the parameters derived from a previous node count and simulate the
/// network at the true counts.
pub fn robustness_nw(
    config: &DeploymentConfig,
    n_w_true: &[u32],
    duration: u64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(n_w_true.len());
    for (i, &n_w) in n_w_true.iter().enumerate() {
        let mut wifi = config.wifi_config(config.l_w_opt)?;
        wifi.n_w = n_w;
        let sim_cfg = SimConfig::wifi_lte(wifi, duration, seed + i as u64)?;
        rows.push(sim_row(f64::from(n_w), &sim_cfg)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_window_from_silence_probability() {
        assert_eq!(cw_from_rho_c(0.6, 20), 81);
    }

    #[test]
    fn duty_cycle_is_complement_of_rho_a() {
        // small slot count keeps the optimizer quick
        let input = DeploymentInput { n_w: 8, gamma: 1.0, s: 8, l_w_max: 8 };
        let config = derive_deployment(&input).unwrap();
        assert!((config.q_l_opt - (1.0 - config.optimum.rho_a_opt)).abs() < 1e-15);
        assert_eq!(config.l_w_opt, config.optimum.l_c_opt);
        assert!(config.cw_opt >= 3);
    }

    #[test]
    fn rounded_window_stays_near_continuous_optimum() {
        let input = DeploymentInput { n_w: 8, gamma: 1.0, s: 8, l_w_max: 8 };
        let config = derive_deployment(&input).unwrap();
        // one window step bounds the rounding error
        let step_up = (1.0 - 2.0 / f64::from(config.cw_opt)).powi(8);
        let step_dn = (1.0 - 2.0 / f64::from(config.cw_opt - 2)).powi(8);
        let gap = (config.rho_c_implied() - config.optimum.rho_c_opt).abs();
        assert!(gap <= (step_up - step_dn).abs() + 1e-9, "gap {gap} too large");
    }
}

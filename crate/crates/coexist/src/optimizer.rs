//! Constrained throughput maximization: given a desired throughput
//! proportion, tune the no-transmission probabilities and the CSMA packet
//! time for maximum total throughput. A numeric search handles arbitrary
//! packet times; explicit approximations exist for whole-slot multiples in
//! the one-Aloha-node and many-Aloha-node regimes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{throughput_report_scn, Scenario};
use crate::error::{Error, Result};
use crate::lambertw::lambert_w0_exp;

/// Problem statement for the numeric optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    /// Desired throughput proportion lambda_a / lambda_c.
    pub gamma: f64,
    pub n_a: u32,
    pub n_c: u32,
    pub s: u32,
    /// Packet times to search; defaults to 1..=3s.
    pub l_c_candidates: Vec<u32>,
    /// Grid resolution of the rho_a line search.
    pub rho_a_step: f64,
    /// Relative tolerance on the achieved throughput proportion.
    pub ratio_tol: f64,
}

impl OptimizationSpec {
    pub fn new(gamma: f64, n_a: u32, n_c: u32, s: u32) -> Result<Self> {
        let spec = OptimizationSpec {
            gamma,
            n_a,
            n_c,
            s,
            l_c_candidates: (1..=3 * s).collect(),
            rho_a_step: 1e-3,
            ratio_tol: 1e-6,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_candidates(mut self, candidates: Vec<u32>) -> Self {
        self.l_c_candidates = candidates;
        self
    }

    pub fn with_rho_a_step(mut self, step: f64) -> Self {
        self.rho_a_step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.s < 1 {
            return Err(Error::InvalidConfig("s must be >= 1".into()));
        }
        if self.l_c_candidates.is_empty() {
            return Err(Error::InvalidConfig("candidate packet-time set is empty".into()));
        }
        if self.l_c_candidates.iter().any(|&l| l < 1) {
            return Err(Error::InvalidConfig("packet times must be >= 1".into()));
        }
        if !(self.rho_a_step > 0.0 && self.rho_a_step < 0.5) {
            return Err(Error::InvalidConfig("rho_a_step must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// How an optimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Numeric,
    ClosedFormNA1,
    ClosedFormNALarge,
}

/// Regimes covered by the explicit optimum approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedFormRegime {
    /// Exactly one Aloha node.
    NA1,
    /// Aloha population large enough that ln(rho_a) approximations apply.
    NALarge,
}

/// Optimum found for one problem statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub gamma: f64,
    pub rho_a_opt: f64,
    pub rho_c_opt: f64,
    pub l_c_opt: u32,
    pub lambda_max: f64,
    /// lambda_a / lambda_c re-evaluated through the analytic route at the
    /// returned optimum.
    pub achieved_ratio: f64,
    pub method: SolveMethod,
    pub notes: Vec<String>,
}

/// Throughput proportion at one parameter point; infinite when the CSMA
/// side is silent.
fn ratio_at(scn: &Scenario) -> Result<f64> {
    let rep = throughput_report_scn(scn)?;
    if rep.lambda_c <= 0.0 {
        return Ok(if rep.lambda_a > 0.0 { f64::INFINITY } else { f64::NAN });
    }
    Ok(rep.lambda_a / rep.lambda_c)
}

/// Outcome of eliminating rho_c through the proportion constraint.
#[derive(Debug, Clone, Copy)]
pub struct RatioSolution {
    pub rho_c: f64,
    /// True when the descent ladder missed the dip and a minimum hunt was
    /// needed to establish feasibility.
    pub used_fallback_scan: bool,
}

/// Probe points descending from 1, dense near 1 where the ratio blows up.
fn rho_c_ladder() -> Vec<f64> {
    let mut probes = Vec::with_capacity(32);
    let mut gap = 1e-6;
    while gap < 1.0 {
        probes.push(1.0 - gap);
        gap *= 2.5;
    }
    probes.extend([0.25, 0.12, 0.05, 0.02, 1e-3, 1e-5]);
    probes
}

/// Find the largest rho_c in (0,1) at which lambda_a / lambda_c equals
/// `gamma`, or `None` when the proportion is unattainable at this
/// (rho_a, l_c).
///
/// The ratio diverges as rho_c approaches 1 (the CSMA network falls
/// silent) and again as rho_c approaches 0 (CSMA collisions), with a dip
/// in between; the largest root sits on the increasing branch nearest 1
/// and maximizes total throughput because the Aloha throughput grows with
/// rho_c. A descent ladder from 1 brackets the crossing; when every rung
/// stays above `gamma`, a golden-section hunt for the dip decides whether
/// a crossing hides between rungs.
pub fn ratio_solve_rho_c(
    gamma: f64,
    rho_a: f64,
    l_c: u32,
    n_a: u32,
    n_c: u32,
    s: u32,
    tol: f64,
) -> Result<Option<RatioSolution>> {
    if !(0.0..1.0).contains(&rho_a) || rho_a == 0.0 {
        return Ok(None);
    }
    let scn_at = |rho_c: f64| Scenario::from_rho(n_a, n_c, s, l_c, rho_a, rho_c);
    let eval = |rho_c: f64| -> Result<f64> { ratio_at(&scn_at(rho_c)?) };

    let probes = rho_c_ladder();
    let mut bracket = None;
    let mut hi = f64::NAN;
    let mut hi_val = f64::NAN;
    let mut min_rung = (f64::NAN, f64::INFINITY);
    for (k, &p) in probes.iter().enumerate() {
        let r = eval(p)?;
        if r.is_nan() {
            continue;
        }
        if r < min_rung.1 {
            min_rung = (p, r);
        }
        if !hi.is_nan() && hi_val > gamma && r <= gamma {
            bracket = Some((p, hi));
            break;
        }
        // once past the dip the ratio only rises again
        if k > 0 && r > hi_val && r > 100.0 * gamma {
            break;
        }
        hi = p;
        hi_val = r;
    }

    let mut used_fallback_scan = false;
    if bracket.is_none() {
        // the dip may hide between rungs: golden-section it around the
        // lowest rung seen
        used_fallback_scan = true;
        let (seed, _) = min_rung;
        if seed.is_nan() {
            return Ok(None);
        }
        let idx = probes.iter().position(|&p| p == seed).unwrap_or(0);
        let mut lo = if idx + 1 < probes.len() { probes[idx + 1] } else { 1e-9 };
        let mut hi_b = if idx > 0 { probes[idx - 1] } else { 1.0 - 1e-12 };
        if lo > hi_b {
            std::mem::swap(&mut lo, &mut hi_b);
        }
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi_b - phi * (hi_b - lo);
        let mut x2 = lo + phi * (hi_b - lo);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        let mut best_min = min_rung;
        for _ in 0..40 {
            if f1 <= f2 {
                hi_b = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi_b - phi * (hi_b - lo);
                f1 = eval(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi_b - lo);
                f2 = eval(x2)?;
            }
            let (xm, fm) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if fm < best_min.1 {
                best_min = (xm, fm);
            }
            if fm <= gamma {
                break;
            }
            if hi_b - lo < 1e-12 {
                break;
            }
        }
        if best_min.1 > gamma {
            return Ok(None);
        }
        bracket = Some((best_min.0, 1.0 - 1e-12));
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(None);
    };

    // bisect on the sign of ratio - gamma; ratio exceeds gamma on the hi side
    let mut best = hi;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        if r.is_nan() || r > gamma {
            hi = mid;
        } else {
            lo = mid;
        }
        best = mid;
        if (hi - lo) < 1e-15 {
            break;
        }
        if r.is_finite() && (r - gamma).abs() <= tol * gamma {
            break;
        }
    }
    let achieved = eval(best)?;
    if !achieved.is_finite() || (achieved - gamma).abs() > 10.0 * tol * gamma {
        return Ok(None);
    }
    Ok(Some(RatioSolution { rho_c: best, used_fallback_scan }))
}

#[derive(Debug, Clone, Copy)]
struct CandidatePoint {
    rho_a: f64,
    rho_c: f64,
    lambda_total: f64,
    fallback: bool,
}

fn eval_feasible(
    spec: &OptimizationSpec,
    l_c: u32,
    rho_a: f64,
    tol: f64,
) -> Result<Option<CandidatePoint>> {
    let sol = ratio_solve_rho_c(spec.gamma, rho_a, l_c, spec.n_a, spec.n_c, spec.s, tol)?;
    let Some(sol) = sol else { return Ok(None) };
    let scn = Scenario::from_rho(spec.n_a, spec.n_c, spec.s, l_c, rho_a, sol.rho_c)?;
    let rep = throughput_report_scn(&scn)?;
    Ok(Some(CandidatePoint {
        rho_a,
        rho_c: sol.rho_c,
        lambda_total: rep.lambda_total,
        fallback: sol.used_fallback_scan,
    }))
}

/// rho_a probe points: the uniform grid at the requested step plus
/// geometric tails toward both ends, where extreme proportions push the
/// optimum.
fn rho_a_grid(step: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = Vec::new();
    let steps = (1.0 / step).ceil() as usize;
    for k in 1..steps {
        let x = k as f64 * step;
        if x < 1.0 {
            grid.push(x);
        }
    }
    for t in [1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
        grid.push(t);
        grid.push(1.0 - t);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Golden-section maximization of the constrained objective over rho_a.
fn golden_refine(
    spec: &OptimizationSpec,
    l_c: u32,
    center: f64,
    radius: f64,
    iters: u32,
    tol: f64,
    mut best: CandidatePoint,
) -> Result<CandidatePoint> {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut lo = (center - radius).max(1e-9);
    let mut hi = (center + radius).min(1.0 - 1e-12);
    let probe = |rho_a: f64, best: &mut CandidatePoint| -> Result<f64> {
        match eval_feasible(spec, l_c, rho_a, tol)? {
            Some(pt) => {
                if pt.lambda_total > best.lambda_total {
                    *best = pt;
                }
                Ok(pt.lambda_total)
            }
            None => Ok(f64::NEG_INFINITY),
        }
    };
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = probe(x1, &mut best)?;
    let mut f2 = probe(x2, &mut best)?;
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = probe(x1, &mut best)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = probe(x2, &mut best)?;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(best)
}

/// Coarse line search for a fixed packet time: grid sweep plus a short
/// refinement, at a relaxed constraint tolerance.
fn coarse_candidate(spec: &OptimizationSpec, l_c: u32) -> Result<Option<CandidatePoint>> {
    let coarse_tol = spec.ratio_tol.max(1e-4);
    let mut best: Option<CandidatePoint> = None;
    for &rho_a in &rho_a_grid(spec.rho_a_step) {
        if let Some(pt) = eval_feasible(spec, l_c, rho_a, coarse_tol)? {
            if best.is_none_or(|b| pt.lambda_total > b.lambda_total) {
                best = Some(pt);
            }
        }
    }
    let Some(seed) = best else { return Ok(None) };
    let refined = golden_refine(spec, l_c, seed.rho_a, spec.rho_a_step, 14, coarse_tol, seed)?;
    Ok(Some(refined))
}

/// Full-precision refinement around a coarse winner.
fn polish_candidate(
    spec: &OptimizationSpec,
    l_c: u32,
    seed: CandidatePoint,
) -> Result<CandidatePoint> {
    let fine_tol = (spec.ratio_tol * 0.01).max(1e-10);
    let radius = spec.rho_a_step;
    let mut pt = golden_refine(spec, l_c, seed.rho_a, radius, 40, fine_tol, seed)?;
    // final constraint solve at full precision
    if let Some(fin) = eval_feasible(spec, l_c, pt.rho_a, fine_tol)? {
        pt = fin;
    }
    Ok(pt)
}

/// Numeric solution of the constrained maximization over
/// (rho_a, rho_c, l_c). Candidates are evaluated independently (and in
/// parallel where the host provides threads), shortlisted on a coarse
/// pass, polished, and merged by total throughput with near-ties broken
/// toward the shorter packet time.
pub fn optimize(spec: &OptimizationSpec) -> Result<OptimizationResult> {
    spec.validate()?;
    let coarse: Vec<(u32, Option<CandidatePoint>)> = spec
        .l_c_candidates
        .par_iter()
        .map(|&l_c| coarse_candidate(spec, l_c).map(|pt| (l_c, pt)))
        .collect::<Result<_>>()?;

    let best_coarse = coarse
        .iter()
        .filter_map(|(_, pt)| pt.as_ref().map(|p| p.lambda_total))
        .fold(f64::NEG_INFINITY, f64::max);
    if best_coarse == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!(
            "no (rho_a, rho_c, l_c) attains proportion {}",
            spec.gamma
        )));
    }
    // polish everything within reach of the coarse winner
    let mut shortlist: Vec<(u32, CandidatePoint)> = coarse
        .into_iter()
        .filter_map(|(l_c, pt)| pt.map(|p| (l_c, p)))
        .filter(|(_, p)| p.lambda_total >= best_coarse - 5e-3)
        .collect();
    shortlist.sort_by(|a, b| b.1.lambda_total.total_cmp(&a.1.lambda_total));
    shortlist.truncate(16);

    let polished: Vec<(u32, CandidatePoint)> = shortlist
        .par_iter()
        .map(|&(l_c, seed)| polish_candidate(spec, l_c, seed).map(|pt| (l_c, pt)))
        .collect::<Result<_>>()?;

    let mut best: Option<(u32, CandidatePoint)> = None;
    let mut any_fallback = false;
    for (l_c, pt) in polished {
        any_fallback |= pt.fallback;
        best = Some(match best {
            None => (l_c, pt),
            Some((bl, bp)) => {
                if pt.lambda_total > bp.lambda_total + 1e-9 {
                    (l_c, pt)
                } else if (pt.lambda_total - bp.lambda_total).abs() <= 1e-9 && l_c < bl {
                    // equal-throughput tie: shorter packets spill into
                    // fewer slots
                    (l_c, pt)
                } else {
                    (bl, bp)
                }
            }
        });
    }
    let (l_c_opt, pt) = best.expect("shortlist nonempty");

    let scn = Scenario::from_rho(spec.n_a, spec.n_c, spec.s, l_c_opt, pt.rho_a, pt.rho_c)?;
    let rep = throughput_report_scn(&scn)?;
    let achieved = rep.lambda_a / rep.lambda_c;
    let mut notes = Vec::new();
    if any_fallback {
        notes.push("ratio bracketing used the dip-hunt fallback for some points".to_string());
    }
    if ((achieved - spec.gamma) / spec.gamma).abs() > spec.ratio_tol {
        notes.push(format!(
            "achieved proportion {achieved} misses target beyond tolerance {}",
            spec.ratio_tol
        ));
    }
    Ok(OptimizationResult {
        gamma: spec.gamma,
        rho_a_opt: pt.rho_a,
        rho_c_opt: pt.rho_c,
        l_c_opt,
        lambda_max: rep.lambda_total,
        achieved_ratio: achieved,
        method: SolveMethod::Numeric,
        notes,
    })
}

/// Explicit optimum approximations for whole-slot packet multiples; the
/// optimal packet time is one slot in both regimes, and the remaining
/// parameters have closed forms under the near-silent-CSMA approximation.
pub fn closed_form_optimum(gamma: f64, regime: ClosedFormRegime, s: u32) -> Result<OptimizationResult> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    if s < 1 {
        return Err(Error::InvalidConfig("s must be >= 1".into()));
    }
    let a = 1.0 / s as f64;
    match regime {
        ClosedFormRegime::NALarge => {
            let root = (gamma * gamma + 4.0 * gamma).sqrt();
            let rho_a = (0.5 * (gamma - root)).exp();
            let inner = 1.0 + 0.5 * (1.0 - (1.0 + 4.0 / gamma).sqrt()) * ((0.5 * (root - gamma)).exp() - 1.0);
            let rho_c = 1.0 + a * inner.ln() / (1.0 - rho_a);
            let lambda_max = (1.0 + gamma) * (root - gamma) * rho_a / (root + gamma);
            Ok(OptimizationResult {
                gamma,
                rho_a_opt: rho_a,
                rho_c_opt: rho_c,
                l_c_opt: s,
                lambda_max,
                achieved_ratio: gamma,
                method: SolveMethod::ClosedFormNALarge,
                notes: vec!["near-silent-CSMA approximation".to_string()],
            })
        }
        ClosedFormRegime::NA1 => {
            let (rho_a, w) = solve_na1_equation(gamma, s)?;
            let rho_c = a * w / (1.0 - rho_a);
            let lambda_max =
                (1.0 + gamma) * (1.0 - rho_a) * rho_a / (rho_a * (gamma - 1.0) + 1.0);
            Ok(OptimizationResult {
                gamma,
                rho_a_opt: rho_a,
                rho_c_opt: rho_c.clamp(0.0, 1.0),
                l_c_opt: s,
                lambda_max,
                achieved_ratio: gamma,
                method: SolveMethod::ClosedFormNA1,
                notes: vec![
                    "near-silent-CSMA approximation; single-node proportion equation".to_string(),
                ],
            })
        }
    }
}

/// The single-Aloha-node optimality condition: the non-zero root in (0,1) of
///
///   a g rho^2 W (1 - (1 - rho) (1 - W)^s) = (1 - rho)^3,
///
/// with W = W0(exp(s (1 - rho))). Scanned for sign changes and bisected;
/// when several roots exist the one with the largest objective value wins.
fn solve_na1_equation(gamma: f64, s: u32) -> Result<(f64, f64)> {
    let a = 1.0 / s as f64;
    let residual = |rho: f64| -> Result<f64> {
        let w = lambert_w0_exp(s as f64 * (1.0 - rho))?;
        let lhs = a * gamma * rho * rho * w * (1.0 - (1.0 - rho) * (1.0 - w).powi(s as i32));
        Ok(lhs - (1.0 - rho).powi(3))
    };
    let objective =
        |rho: f64| (1.0 + gamma) * (1.0 - rho) * rho / (rho * (gamma - 1.0) + 1.0);

    let n_grid = 4000;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..n_grid {
        let rho = i as f64 / n_grid as f64;
        let f = residual(rho)?;
        if let Some((pr, pf)) = prev {
            if pf == 0.0 {
                roots.push(pr);
            } else if pf.signum() != f.signum() && f.is_finite() && pf.is_finite() {
                let (mut lo, mut hi, mut flo) = (pr, rho, pf);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let fm = residual(mid)?;
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 {
                        break;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        prev = Some((rho, f));
    }
    roots.retain(|&r| r > 1e-9 && r < 1.0 - 1e-12);
    let best = roots
        .into_iter()
        .max_by(|x, y| objective(*x).total_cmp(&objective(*y)))
        .ok_or_else(|| Error::RootFind {
            context: "single-node optimality equation",
            detail: format!("no root in (0,1) for gamma = {gamma}, s = {s}"),
        })?;
    let w = lambert_w0_exp(s as f64 * (1.0 - best))?;
    Ok((best, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_solution_hits_target() {
        let sol = ratio_solve_rho_c(1.0, 0.55, 10, 20, 20, 10, 1e-6).unwrap().unwrap();
        let scn = Scenario::from_rho(20, 20, 10, 10, 0.55, sol.rho_c).unwrap();
        let rep = throughput_report_scn(&scn).unwrap();
        assert!((rep.lambda_a / rep.lambda_c - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn growing_gamma_silences_csma() {
        let mut last = 0.0;
        for gamma in [2.0, 10.0, 100.0, 1000.0] {
            let sol = ratio_solve_rho_c(gamma, 0.5, 10, 20, 20, 10, 1e-6).unwrap().unwrap();
            assert!(sol.rho_c > last, "rho_c should rise with gamma");
            last = sol.rho_c;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn unattainable_proportion_returns_none() {
        // at rho_a = 0.5 the ratio never dips to 1 for this geometry
        assert!(ratio_solve_rho_c(1.0, 0.5, 10, 20, 20, 10, 1e-6).unwrap().is_none());
    }

    #[test]
    fn closed_form_large_population_at_unit_gamma() {
        let res = closed_form_optimum(1.0, ClosedFormRegime::NALarge, 20).unwrap();
        assert!((res.rho_a_opt - ((1.0 - 5.0f64.sqrt()) / 2.0).exp()).abs() < 1e-12);
        assert!((res.rho_a_opt - 0.5390).abs() < 5e-4);
        assert!((res.lambda_max - 0.4117).abs() < 5e-4);
        assert_eq!(res.l_c_opt, 20);
    }

    #[test]
    fn closed_form_vanishing_gamma_pushes_rho_a_to_one() {
        let res = closed_form_optimum(1e-8, ClosedFormRegime::NALarge, 20).unwrap();
        assert!(res.rho_a_opt > 0.999);
    }

    #[test]
    fn infeasible_without_aloha_nodes() {
        let spec = OptimizationSpec::new(1.0, 0, 20, 4).unwrap().with_candidates(vec![4]);
        assert!(matches!(optimize(&spec), Err(Error::Infeasible(_))));
    }
}

//! Optimizer behavior beyond the unit examples: constraint verification,
//! agreement between the closed-form and numeric optima, and the
//! packet-time structure of the optimum.

use coexist::analytic::{throughput_report_scn, Scenario};
use coexist::optimizer::{
    closed_form_optimum, optimize, ratio_solve_rho_c, ClosedFormRegime, OptimizationSpec,
};

#[test]
fn returned_optima_satisfy_the_proportion_constraint() {
    for gamma in [0.5f64, 1.0, 4.0] {
        let spec = OptimizationSpec::new(gamma, 4, 6, 6).unwrap().with_rho_a_step(1e-2);
        let res = optimize(&spec).unwrap();
        let scn = Scenario::from_rho(4, 6, 6, res.l_c_opt, res.rho_a_opt, res.rho_c_opt).unwrap();
        let rep = throughput_report_scn(&scn).unwrap();
        let achieved = rep.lambda_a / rep.lambda_c;
        assert!(
            ((achieved - gamma) / gamma).abs() <= 1e-6,
            "gamma={gamma}: achieved {achieved}"
        );
        assert!((res.lambda_max - rep.lambda_total).abs() <= 1e-6);
    }
}

#[test]
fn largest_root_agrees_with_a_dense_scan() {
    // monotonicity probe: walk rho_c densely from the top and compare the
    // first crossing with the bracketed solution
    let (gamma, rho_a, l_c, n_a, n_c, s) = (2.0, 0.5, 10, 20, 20, 10);
    let sol = ratio_solve_rho_c(gamma, rho_a, l_c, n_a, n_c, s, 1e-8).unwrap().unwrap();
    let ratio_at = |rho_c: f64| {
        let scn = Scenario::from_rho(n_a, n_c, s, l_c, rho_a, rho_c).unwrap();
        let rep = throughput_report_scn(&scn).unwrap();
        rep.lambda_a / rep.lambda_c
    };
    let mut scan_root = None;
    let n = 200_000;
    for i in (1..n).rev() {
        let x = i as f64 / n as f64;
        if ratio_at(x) <= gamma {
            scan_root = Some(x);
            break;
        }
    }
    let scan_root = scan_root.expect("dense scan finds the crossing");
    assert!(
        (sol.rho_c - scan_root).abs() <= 2.0 / n as f64,
        "bracketed {} vs scanned {scan_root}",
        sol.rho_c
    );
}

#[test]
fn closed_form_large_population_tracks_the_numeric_optimum() {
    // n_a = 50 stands in for the large-population regime; the closed forms
    // are approximations built on a near-silent CSMA side, so the match is
    // loose but must stay within a few percent on throughput
    for gamma in [0.5f64, 1.0, 2.0] {
        let closed = closed_form_optimum(gamma, ClosedFormRegime::NALarge, 20).unwrap();
        let spec = OptimizationSpec::new(gamma, 50, 20, 20)
            .unwrap()
            .with_candidates(vec![20, 40, 60])
            .with_rho_a_step(5e-3);
        let numeric = optimize(&spec).unwrap();
        assert_eq!(numeric.l_c_opt, 20, "one-slot packets win among whole-slot multiples");
        assert!(
            (closed.lambda_max - numeric.lambda_max).abs() <= 2e-2,
            "gamma={gamma}: lambda {} vs {}",
            closed.lambda_max,
            numeric.lambda_max
        );
        // the rho_a agreement degrades toward small gamma where the
        // silent-CSMA assumption is weakest; 5e-2 holds across this range
        assert!(
            (closed.rho_a_opt - numeric.rho_a_opt).abs() <= 5e-2,
            "gamma={gamma}: rho_a {} vs {}",
            closed.rho_a_opt,
            numeric.rho_a_opt
        );
    }
}

#[test]
fn single_node_closed_form_is_flagged_against_the_numeric_optimum() {
    // the published single-node optimality condition appears garbled;
    // solving it as written lands far from the numeric optimum, so the
    // numeric result is authoritative and the closed form is advisory only
    let closed = closed_form_optimum(1.0, ClosedFormRegime::NA1, 20).unwrap();
    let spec = OptimizationSpec::new(1.0, 1, 20, 20)
        .unwrap()
        .with_candidates(vec![20])
        .with_rho_a_step(5e-3);
    let numeric = optimize(&spec).unwrap();
    let disagreement = (closed.rho_a_opt - numeric.rho_a_opt).abs();
    assert!(
        disagreement > 5e-2,
        "if the published condition starts matching, drop the advisory note"
    );
    assert!(!closed.notes.is_empty());
    assert!(numeric.lambda_max >= closed.lambda_max - 1e-9);
}

#[test]
fn optimal_packet_time_sits_just_below_one_slot() {
    // one Aloha node: the window holds across three decades
    for gamma in [0.1f64, 1.0, 10.0] {
        let spec = OptimizationSpec::new(gamma, 1, 20, 20).unwrap().with_rho_a_step(1e-2);
        let res = optimize(&spec).unwrap();
        assert!(res.l_c_opt < 20, "gamma={gamma}: {}", res.l_c_opt);
        assert!(res.l_c_opt >= 15, "gamma={gamma}: {}", res.l_c_opt);
    }
    // twenty Aloha nodes: the window holds while the CSMA share matters;
    // at gamma = 10 the exact optimum collapses to very short packets
    // (they dodge the heavy Aloha traffic entirely), clearing the window's
    // lower edge by a solid margin, so only the upper bound binds there
    for gamma in [0.1f64, 1.0] {
        let spec = OptimizationSpec::new(gamma, 20, 20, 20).unwrap().with_rho_a_step(1e-2);
        let res = optimize(&spec).unwrap();
        assert!(res.l_c_opt < 20 && res.l_c_opt >= 15, "gamma={gamma}: {}", res.l_c_opt);
    }
    let spec = OptimizationSpec::new(10.0, 20, 20, 20).unwrap().with_rho_a_step(1e-2);
    let res = optimize(&spec).unwrap();
    assert!(res.l_c_opt < 20);
}

#[test]
fn tuned_packet_time_beats_the_default_at_equal_throughput() {
    let spec = OptimizationSpec::new(1.0, 1, 20, 20).unwrap().with_rho_a_step(1e-2);
    let best = optimize(&spec).unwrap();
    let at_slot = optimize(
        &OptimizationSpec::new(1.0, 1, 20, 20)
            .unwrap()
            .with_candidates(vec![20])
            .with_rho_a_step(1e-2),
    )
    .unwrap();
    assert!(best.l_c_opt < 20);
    assert!(
        best.lambda_max > at_slot.lambda_max + 0.05,
        "tuning gains {} over {}",
        best.lambda_max,
        at_slot.lambda_max
    );
}

#[test]
fn csma_optimum_stays_near_silent_for_whole_slot_packets() {
    // at the one-slot optimum the CSMA side backs far off across four
    // decades of desired proportion
    for gamma in [0.01f64, 0.1, 1.0, 10.0, 100.0] {
        let spec = OptimizationSpec::new(gamma, 20, 20, 100)
            .unwrap()
            .with_candidates(vec![100])
            .with_rho_a_step(5e-3);
        let res = optimize(&spec).unwrap();
        assert!(res.rho_c_opt >= 0.8, "gamma={gamma}: rho_c {}", res.rho_c_opt);
    }
}

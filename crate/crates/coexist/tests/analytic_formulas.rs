//! The closed-form path against the worked coefficient matrices, the
//! published rational expressions, the special-case reductions, and the
//! chain solve.

use coexist::analytic::{
    alpha_c_equal_closed, alpha_c_integer_closed, aloha_throughput_equal_closed,
    aloha_throughput_integer_closed, build_idle_system, csma_throughput_equal_closed,
    csma_throughput_integer_closed, dual_path_gap, solve_idle, span_counts,
    throughput_report_scn, Scenario,
};
use coexist::SystemConfig;
use proptest::prelude::*;

fn scn(n_a: u32, n_c: u32, s: u32, l_c: u32, rho_a: f64, rho_c: f64) -> Scenario {
    Scenario::from_rho(n_a, n_c, s, l_c, rho_a, rho_c).unwrap()
}

fn assert_matrix_eq(got: &coexist::linalg::DMat, want: &[[f64; 4]; 4], context: &str) {
    for i in 0..4 {
        for j in 0..4 {
            assert!(
                (got[(i, j)] - want[i][j]).abs() < 1e-15,
                "{context}: entry ({i},{j}) {} vs {}",
                got[(i, j)],
                want[i][j]
            );
        }
    }
}

/// Pseudo-random interior probabilities without pulling in an RNG.
fn rho_samples(count: usize) -> Vec<(f64, f64)> {
    let mut state = 0x243f6a8885a308d3u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        0.02 + 0.96 * (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count).map(|_| (next(), next())).collect()
}

#[test]
fn long_packet_matrix_matches_the_worked_example() {
    // five mini-slots in a four-phase slot
    for (rho_a, rho_c) in rho_samples(25) {
        let sys = build_idle_system(&scn(1, 1, 4, 5, rho_a, rho_c));
        let u = rho_a * (rho_c - 1.0);
        let v = rho_c;
        let z = rho_a * (1.0 - rho_c);
        let want = [
            [u, u, u, 2.0 * u],
            [v, 0.0, 0.0, z],
            [z, v, 0.0, 0.0],
            [0.0, z, v, 0.0],
        ];
        assert_matrix_eq(&sys.a, &want, "l_c=5, s=4");
    }
}

#[test]
fn short_packet_matrix_matches_the_worked_example() {
    // two mini-slots in a four-phase slot
    for (rho_a, rho_c) in rho_samples(25) {
        let sys = build_idle_system(&scn(1, 1, 4, 2, rho_a, rho_c));
        let u = rho_a * (rho_c - 1.0);
        let v = rho_c;
        let w = 1.0 - rho_c;
        let z = rho_a * (1.0 - rho_c);
        let want = [
            [0.0, 0.0, u, u],
            [v, 0.0, z, 0.0],
            [0.0, v, 0.0, z],
            [w, 0.0, v, 0.0],
        ];
        assert_matrix_eq(&sys.a, &want, "l_c=2, s=4");
    }
}

#[test]
fn whole_slot_matrix_is_head_row_plus_subdiagonal() {
    let (rho_a, rho_c) = (0.37, 0.81);
    let sys = build_idle_system(&scn(1, 1, 4, 4, rho_a, rho_c));
    let g = rho_a * (rho_c - 1.0);
    let f = rho_c + rho_a - rho_c * rho_a;
    for j in 0..4 {
        assert!((sys.a[(0, j)] - g).abs() < 1e-15);
    }
    for i in 1..4 {
        for j in 0..4 {
            let want = if j + 1 == i { f } else { 0.0 };
            assert!((sys.a[(i, j)] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn head_idle_probability_is_chain_confirmed_for_long_packets() {
    // l_c=5, s=4: the idle-system solution equals the chain solve at full
    // precision; the frozen value below is additionally confirmed by the
    // simulator's per-phase idle occupancy
    for (rho_a, rho_c) in rho_samples(25) {
        let sys = solve_idle(&scn(1, 1, 4, 5, rho_a, rho_c)).unwrap();
        let cfg = SystemConfig::from_rho(1, 1, rho_a, rho_c, 4, 5).unwrap();
        let chain = coexist::chain::enumerate_chain(&cfg).unwrap();
        let direct = chain.pi_tilde_of(&coexist::chain::ChainState::idle_both(0));
        assert!((sys.y[0] - direct).abs() < 1e-12, "rho=({rho_a},{rho_c})");
    }
    let sys = solve_idle(&scn(1, 1, 4, 5, 0.5, 0.5)).unwrap();
    assert!((sys.y[0] - 0.07124681933842239).abs() < 1e-12);

    // the published rational for this quantity does not solve the
    // coefficient system it came with: it reads 2.16x the true value here
    // and turns negative at other admissible points, so it is recorded as
    // deviating
    let rational = 0.5 * 0.25
        / (4.0 * (-0.5f64).powi(3) * 0.125 + 4.0 * 0.5 * 0.25 * 0.25 + (0.5 - 1.0) * 0.5
            + 8.0 * 0.125);
    assert!((rational - 0.15384615384615385).abs() < 1e-12);
    assert!((sys.y[0] - rational).abs() > 0.05);
}

#[test]
fn idle_fraction_matches_the_published_short_packet_rational() {
    for (rho_a, rho_c) in rho_samples(25) {
        let total: f64 = solve_idle(&scn(1, 1, 4, 2, rho_a, rho_c)).unwrap().y.iter().sum();
        let num = -(rho_a
            * ((rho_c - 1.0).powi(3) * rho_a * rho_a
                + (-4.0 * rho_c * rho_c + 5.0 * rho_c - 1.0) * rho_a
                - rho_c.powi(3)
                - rho_c * rho_c
                - 2.0));
        let den = 4.0
            + 4.0 * (rho_c - 1.0).powi(4) * rho_a * rho_a
            + (-4.0 * rho_c.powi(4) + 16.0 * rho_c * rho_c - 16.0 * rho_c + 4.0) * rho_a;
        assert!((total - num / den).abs() < 1e-12, "rho=({rho_a},{rho_c})");
    }
}

#[test]
fn aloha_throughput_matches_the_published_short_packet_rational() {
    let n_a = 7u32;
    for (rho_a, rho_c) in rho_samples(25) {
        let rep = throughput_report_scn(&scn(n_a, 5, 4, 2, rho_a, rho_c)).unwrap();
        let n = f64::from(n_a);
        let num = n
            * rho_a.powf((n - 1.0) / n)
            * (1.0 - rho_a.powf(1.0 / n))
            * (2.0 * rho_a * rho_c * rho_c - 2.0 * rho_a * rho_c + 1.0);
        let den = 1.0
            + (rho_c - 1.0).powi(4) * rho_a * rho_a
            + (-rho_c.powi(4) + 4.0 * rho_c * rho_c - 4.0 * rho_c + 1.0) * rho_a;
        assert!((rep.lambda_a - num / den).abs() < 1e-12, "rho=({rho_a},{rho_c})");
    }
}

#[test]
fn csma_throughput_matches_the_published_short_packet_rational_up_to_sign() {
    // the published numerator polynomial evaluates negative throughout the
    // admissible range, so the expression carries a stray sign; the negated
    // form matches the solved model exactly
    let n_c = 20u32;
    for (rho_a, rho_c) in rho_samples(25) {
        let rep = throughput_report_scn(&scn(1, n_c, 4, 2, rho_a, rho_c)).unwrap();
        let n = f64::from(n_c);
        let poly = 2.0 * (rho_c - 1.0).powi(3) * rho_a * rho_a
            + (-2.0 * rho_c.powi(3) - 2.0 * rho_c * rho_c + 3.0 * rho_c - 1.0) * rho_a
            - rho_c
            - 1.0;
        let den = 2.0
            + 2.0 * (rho_c - 1.0).powi(4) * rho_a * rho_a
            + (-2.0 * rho_c.powi(4) + 8.0 * rho_c * rho_c - 8.0 * rho_c + 2.0) * rho_a;
        let published = n * rho_a * rho_c.powf((n - 1.0) / n) * (1.0 - rho_c.powf(1.0 / n)) * poly
            / den;
        assert!(published < 0.0, "numerator polynomial is negative here");
        assert!((rep.lambda_c + published).abs() < 1e-12, "rho=({rho_a},{rho_c})");
    }
}

#[test]
fn equal_packet_time_reductions_agree() {
    for (rho_a, rho_c) in rho_samples(40) {
        for s in [2u32, 4, 8] {
            let sc = scn(6, 9, s, s, rho_a, rho_c);
            assert!((alpha_c_integer_closed(&sc) - alpha_c_equal_closed(&sc)).abs() < 1e-12);
            assert!(
                (aloha_throughput_integer_closed(&sc) - aloha_throughput_equal_closed(&sc)).abs()
                    < 1e-12
            );
            assert!(
                (csma_throughput_integer_closed(&sc) - csma_throughput_equal_closed(&sc)).abs()
                    < 1e-12
            );
        }
    }
}

#[test]
fn aloha_throughput_never_gains_from_longer_csma_packets() {
    // fixed contention, growing packet time
    let mut last = f64::INFINITY;
    for l_c in [1u32, 5, 10, 15, 30] {
        let rep = throughput_report_scn(&scn(20, 20, 10, l_c, 0.5, 0.5)).unwrap();
        assert!(rep.lambda_a <= last + 1e-12, "l_c={l_c}");
        last = rep.lambda_a;
    }
}

#[test]
fn span_counts_match_the_boundary_walk_oracle() {
    for s in [2u32, 3, 4, 8, 10] {
        for l_c in 1..=(3 * s) {
            let spans = span_counts(&scn(1, 1, s, l_c, 0.5, 0.5));
            for k in 0..s {
                // count slots covered by [k, k + l_c)
                let mut slots = 0;
                let mut t = k;
                while t < k + l_c {
                    slots += 1;
                    t = (t / s + 1) * s;
                }
                assert_eq!(spans.m[k as usize], slots, "s={s} l_c={l_c} k={k}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn both_routes_agree_and_stay_in_range(
        rho_a in 0.05f64..0.95,
        rho_c in 0.05f64..0.95,
        s in 2u32..8,
        l_c in 1u32..12,
        n_a in 1u32..24,
        n_c in 1u32..24,
    ) {
        let cfg = SystemConfig::from_rho(n_a, n_c, rho_a, rho_c, s, l_c).unwrap();
        prop_assert!(dual_path_gap(&cfg).unwrap() <= 1e-9);
        let rep = throughput_report_scn(&Scenario::from_config(&cfg)).unwrap();
        prop_assert!((0.0..=1.0).contains(&rep.lambda_a));
        prop_assert!((0.0..=1.0).contains(&rep.lambda_c));
        prop_assert!((0.0..=1.0).contains(&rep.alpha_c));
        prop_assert!(rep.lambda_total + rep.alpha_c <= 1.0 + 1e-12);
        prop_assert!((rep.lambda_total - rep.lambda_a - rep.lambda_c).abs() <= 1e-15);
    }

    #[test]
    fn idle_system_solution_is_a_probability_vector(
        rho_a in 0.05f64..0.95,
        rho_c in 0.05f64..0.95,
        s in 2u32..10,
        l_c in 1u32..16,
    ) {
        let sys = solve_idle(&scn(1, 1, s, l_c, rho_a, rho_c)).unwrap();
        let total: f64 = sys.y.iter().sum();
        prop_assert!(sys.y.iter().all(|v| (-1e-15..=1.0).contains(v)));
        prop_assert!(total <= 1.0 + 1e-12);
        // residual of y = A y + b
        let ay = sys.a.mul_vec(&sys.y);
        for ((ay, b), y) in ay.iter().zip(&sys.b).zip(&sys.y) {
            prop_assert!((ay + b - y).abs() <= 1e-12);
        }
    }
}

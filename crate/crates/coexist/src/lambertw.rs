//! Principal branch of the Lambert W function.

use crate::error::{Error, Result};

const INV_E: f64 = 1.0 / std::f64::consts::E;

/// W0(x): the solution w >= -1 of w * e^w = x, for x >= -1/e.
///
/// Halley iteration from a log-based seed; converges to full precision in a
/// handful of steps everywhere on the branch.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < -INV_E - 1e-15 {
        return Err(Error::Domain {
            context: "lambert_w0",
            detail: format!("x = {x} below -1/e"),
        });
    }
    let x = x.max(-INV_E);
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = if x < -0.25 {
        // series around the branch point
        let p = (2.0 * (1.0 + std::f64::consts::E * x)).sqrt();
        -1.0 + p - p * p / 3.0
    } else if x < std::f64::consts::E {
        let l = x.ln_1p();
        l * (1.0 - l / (2.0 + 2.0 * x))
    } else {
        let l = x.ln();
        l - l.ln()
    };

    for _ in 0..60 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }

    let check = w * w.exp();
    let rel = (check - x).abs() / x.abs().max(1e-300);
    if rel > 1e-12 && (check - x).abs() > 1e-14 {
        return Err(Error::RootFind {
            context: "lambert_w0",
            detail: format!("residual {rel:e} at x = {x}"),
        });
    }
    Ok(w)
}

/// W0(e^t) computed without forming e^t, so large exponents stay in range.
/// Solves w + ln w = t.
pub fn lambert_w0_exp(t: f64) -> Result<f64> {
    if t <= 30.0 {
        return lambert_w0(t.exp());
    }
    // Newton on g(w) = w + ln w - t, seeded by the asymptotic expansion
    let mut w = t - t.ln();
    for _ in 0..60 {
        let g = w + w.ln() - t;
        let step = g * w / (w + 1.0);
        w -= step;
        if step.abs() <= 1e-15 * w {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
    }

    #[test]
    fn e_maps_to_one() {
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn omega_constant() {
        assert!((lambert_w0(1.0).unwrap() - 0.5671432904097838).abs() < 1e-12);
    }

    #[test]
    fn inverse_relation_holds_across_range() {
        for &x in &[-0.36, -0.2, -1e-6, 1e-6, 0.5, 2.0, 10.0, 1e4, 1e12, 1e300] {
            let w = lambert_w0(x).unwrap();
            let back = w * w.exp();
            assert!(
                (back - x).abs() <= 1e-12 * x.abs().max(1e-12),
                "x={x} w={w} back={back}"
            );
        }
    }

    #[test]
    fn rejects_below_branch_point() {
        assert!(lambert_w0(-0.4).is_err());
    }

    #[test]
    fn exp_variant_matches_direct_form() {
        for &t in &[0.5f64, 5.0, 25.0] {
            let direct = lambert_w0(t.exp()).unwrap();
            let indirect = lambert_w0_exp(t).unwrap();
            assert!((direct - indirect).abs() < 1e-10 * direct.max(1.0));
        }
        // large t: check w + ln w = t instead
        let t = 500.0;
        let w = lambert_w0_exp(t).unwrap();
        assert!((w + w.ln() - t).abs() < 1e-9);
    }
}

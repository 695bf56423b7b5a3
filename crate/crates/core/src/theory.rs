//! Closed forms for the two-arm adversarial constructions.
//!
//! The over-exploring construction shrinks the mass of the region where arm 1
//! is best by a factor `r > 1`. Its α-divergence from the posterior is at most
//!
//! ```text
//! ε(r) = (1 - r^(α-1)) / (α(1-α))   (α ≠ 1)
//! ε(r) = ln r                       (α = 1)
//! ```
//!
//! and [`r_from_epsilon`] inverts that bound. The under-exploring construction
//! restricts the posterior to the region where arm 2 is best; its divergence
//! only depends on the mass `z` of that region ([`epsilon_from_z`]).

use serde::{Deserialize, Serialize};

use crate::divergence::KL_LIMIT_TOLERANCE;
use crate::error::{Error, Result};

/// Smallest `z` used when tabulating `ε(z)`.
pub const Z_FLOOR: f64 = 1e-4;

fn is_one(alpha: f64) -> bool {
    (alpha - 1.0).abs() <= KL_LIMIT_TOLERANCE
}

fn is_zero(alpha: f64) -> bool {
    alpha.abs() <= KL_LIMIT_TOLERANCE
}

/// Upper bound on `ε` for `0 < α < 1`.
pub fn epsilon_ceiling(alpha: f64) -> f64 {
    if alpha > 0.0 && alpha < 1.0 && !is_one(alpha) {
        1.0 / (alpha * (1.0 - alpha))
    } else {
        f64::INFINITY
    }
}

fn check_over_domain(alpha: f64, epsilon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(epsilon > 0.0) || epsilon.is_nan() {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let ceiling = epsilon_ceiling(alpha);
    if epsilon > ceiling {
        return Err(Error::Domain(format!(
            "epsilon {epsilon} exceeds 1/(alpha(1-alpha)) = {ceiling} for alpha {alpha}"
        )));
    }
    Ok(())
}

/// Mass-shrink factor `r` whose divergence bound equals `epsilon`.
pub fn r_from_epsilon(alpha: f64, epsilon: f64) -> Result<f64> {
    check_over_domain(alpha, epsilon)?;
    if is_one(alpha) {
        return Ok(epsilon.exp());
    }
    let base = 1.0 - epsilon * alpha * (1.0 - alpha);
    Ok(base.powf(1.0 / (alpha - 1.0)))
}

/// The divergence bound at a given `r`; the forward map of [`r_from_epsilon`].
pub fn epsilon_bound_from_r(alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("r must be at least 1, got {r}")));
    }
    if is_one(alpha) {
        return Ok(r.ln());
    }
    Ok((1.0 - r.powf(alpha - 1.0)) / (alpha * (1.0 - alpha)))
}

/// Lower bound `L` on the average per-step regret when the over-exploring
/// construction is used on a fraction `fraction` of the horizon.
pub fn regret_lower_bound(alpha: f64, epsilon: f64, delta: f64, fraction: f64) -> Result<f64> {
    check_over_domain(alpha, epsilon)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("gap must be positive, got {delta}")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let scale = fraction * delta;
    if is_one(alpha) {
        return Ok(scale * (1.0 - (-epsilon).exp()));
    }
    // 1/r = (1 - εα(1-α))^(1/(1-α))
    let base = 1.0 - epsilon * alpha * (1.0 - alpha);
    Ok(scale * (1.0 - base.powf(1.0 / (1.0 - alpha))))
}

/// Divergence of the restriction to the arm-2 region when that region has
/// posterior mass `z`.
pub fn epsilon_from_z(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha < 1.0) || is_one(alpha) {
        return Err(Error::Domain(format!("alpha must be below 1, got {alpha}")));
    }
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::Domain(format!("z must lie in (0, 1], got {z}")));
    }
    if is_zero(alpha) {
        return Ok((1.0 / z).ln());
    }
    Ok((1.0 - z.powf(alpha)) / (alpha * (1.0 - alpha)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub curve_id: String,
    pub alpha: f64,
    /// `ε` for regret-bound curves, `z` for `ε(z)` curves.
    pub x: f64,
    /// `L` or `ε`, respectively.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    /// `L(ε)` for each α over `points` evenly spaced ε in `[eps_min, eps_max]`,
    /// clipped to the valid domain.
    RegretBound {
        curve_id: String,
        delta: f64,
        fraction: f64,
        alphas: Vec<f64>,
        eps_min: f64,
        eps_max: f64,
        points: usize,
    },
    /// `ε(z)` for each α over `points` evenly spaced z in `[z_min, 1]`.
    EpsilonOfZ {
        curve_id: String,
        alphas: Vec<f64>,
        z_min: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub curves: Vec<CurveSpec>,
}

impl CurveSet {
    /// Regret lower bound with Δ = 0.1 and the construction active on half the
    /// horizon.
    pub fn fig5() -> Self {
        Self {
            curves: vec![CurveSpec::RegretBound {
                curve_id: "fig5".into(),
                delta: 0.1,
                fraction: 0.5,
                alphas: vec![0.1, 0.5, 1.0, 2.0, 5.0],
                eps_min: 0.01,
                eps_max: 10.0,
                points: 1000,
            }],
        }
    }

    /// `ε(z)` for α ≤ 0 (`fig6a`) and 0 ≤ α < 1 (`fig6b`).
    pub fn fig6() -> Self {
        Self {
            curves: vec![
                CurveSpec::EpsilonOfZ {
                    curve_id: "fig6a".into(),
                    alphas: vec![-2.0, -1.0, -0.5, 0.0],
                    z_min: Z_FLOOR,
                    points: 1000,
                },
                CurveSpec::EpsilonOfZ {
                    curve_id: "fig6b".into(),
                    alphas: vec![0.0, 0.25, 0.5, 0.75, 0.9],
                    z_min: Z_FLOOR,
                    points: 1000,
                },
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fig5" => Some(Self::fig5()),
            "fig6" => Some(Self::fig6()),
            _ => None,
        }
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// Tabulates every curve in `set`, in declaration order.
pub fn emit_bound_curves(set: &CurveSet) -> Result<Vec<BoundPoint>> {
    let mut rows = Vec::new();
    for curve in &set.curves {
        match curve {
            CurveSpec::RegretBound {
                curve_id,
                delta,
                fraction,
                alphas,
                eps_min,
                eps_max,
                points,
            } => {
                if !(*eps_min > 0.0 && eps_max >= eps_min) || *points == 0 {
                    return Err(Error::config(curve_id.clone(), "need 0 < eps_min <= eps_max and points > 0"));
                }
                for &alpha in alphas {
                    let ceiling = epsilon_ceiling(alpha);
                    for eps in linspace(*eps_min, *eps_max, *points) {
                        if eps > ceiling {
                            continue;
                        }
                        rows.push(BoundPoint {
                            curve_id: curve_id.clone(),
                            alpha,
                            x: eps,
                            value: regret_lower_bound(alpha, eps, *delta, *fraction)?,
                        });
                    }
                }
            }
            CurveSpec::EpsilonOfZ {
                curve_id,
                alphas,
                z_min,
                points,
            } => {
                if !(*z_min >= Z_FLOOR && *z_min <= 1.0) || *points == 0 {
                    return Err(Error::config(
                        curve_id.clone(),
                        format!("z_min must lie in [{Z_FLOOR}, 1] and points > 0"),
                    ));
                }
                for &alpha in alphas {
                    for z in linspace(*z_min, 1.0, *points) {
                        rows.push(BoundPoint {
                            curve_id: curve_id.clone(),
                            alpha,
                            x: z,
                            value: epsilon_from_z(alpha, z)?,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_spot_values() {
        assert!((r_from_epsilon(1.0, 0.1).unwrap() - 0.1f64.exp()).abs() < 1e-12);
        assert!((r_from_epsilon(2.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((r_from_epsilon(0.5, 2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn r_domain_errors() {
        assert!(r_from_epsilon(0.5, 4.01).is_err());
        assert!(r_from_epsilon(0.5, 4.0).unwrap().is_infinite());
        assert!(r_from_epsilon(0.0, 1.0).is_err());
        assert!(r_from_epsilon(-1.0, 1.0).is_err());
        assert!(r_from_epsilon(2.0, 0.0).is_err());
    }

    #[test]
    fn regret_bound_spot_values() {
        let l = regret_lower_bound(1.0, 2f64.ln(), 0.1, 0.5).unwrap();
        assert!((l - 0.025).abs() < 1e-15);
        assert!(regret_lower_bound(1.0, 1e-12, 0.1, 0.5).unwrap() < 1e-13);
        let far = regret_lower_bound(1.0, 50.0, 0.1, 0.5).unwrap();
        assert!((far - 0.05).abs() < 1e-15);
        assert!((regret_lower_bound(2.0, 0.5, 0.1, 1.0).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn epsilon_of_z_spot_values() {
        for alpha in [-2.0, -1.0, 0.0, 0.5, 0.9] {
            assert_eq!(epsilon_from_z(alpha, 1.0).unwrap(), 0.0);
        }
        assert!((epsilon_from_z(0.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((epsilon_from_z(0.5, 0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!((epsilon_from_z(-1.0, 0.2).unwrap() - 2.0).abs() < 1e-14);
        assert!(epsilon_from_z(0.5, 0.0).is_err());
        assert!(epsilon_from_z(0.5, 1.5).is_err());
        assert!(epsilon_from_z(1.0, 0.5).is_err());
    }

    #[test]
    fn epsilon_of_z_continuous_across_zero() {
        for z in [0.01, 0.2, 0.5, 0.9] {
            let at_zero = epsilon_from_z(0.0, z).unwrap();
            for alpha in [1e-4, -1e-4] {
                let near = epsilon_from_z(alpha, z).unwrap();
                assert!(((near - at_zero) / at_zero).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn epsilon_diverges_as_z_vanishes_for_nonpositive_alpha() {
        for alpha in [-1.0, -0.5, 0.0] {
            let mut last = 0.0;
            for z in [1e-2, 1e-4, 1e-8, 1e-16] {
                let e = epsilon_from_z(alpha, z).unwrap();
                assert!(e > last);
                last = e;
            }
            assert!(last > 30.0, "alpha {alpha}: {last}");
        }
        // 0 < α < 1 saturates at 1/(α(1-α)) instead.
        assert!(epsilon_from_z(0.5, 1e-16).unwrap() < 4.0);
    }

    #[test]
    fn fig5_table() {
        let rows = emit_bound_curves(&CurveSet::fig5()).unwrap();
        assert!(!rows.is_empty());
        for w in rows.windows(2) {
            if w[0].alpha == w[1].alpha {
                assert!(w[1].value > w[0].value);
            }
        }
        assert!(rows.iter().all(|p| p.value >= 0.0 && p.value <= 0.05));
    }

    #[test]
    fn fig6_table() {
        let rows = emit_bound_curves(&CurveSet::fig6()).unwrap();
        for w in rows.windows(2) {
            if w[0].alpha == w[1].alpha && w[0].curve_id == w[1].curve_id {
                assert!(w[1].value < w[0].value);
            }
        }
        let worst = rows
            .iter()
            .filter(|p| p.alpha == -2.0)
            .map(|p| p.value)
            .fold(0.0, f64::max);
        assert!(worst > 1e7);
        assert!(rows.iter().all(|p| p.value.is_finite()));
    }

    #[test]
    fn single_point_table() {
        let set = CurveSet {
            curves: vec![CurveSpec::RegretBound {
                curve_id: "one".into(),
                delta: 0.1,
                fraction: 1.0,
                alphas: vec![2.0],
                eps_min: 0.5,
                eps_max: 0.5,
                points: 1,
            }],
        };
        let rows = emit_bound_curves(&set).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value, regret_lower_bound(2.0, 0.5, 0.1, 1.0).unwrap());
    }

    proptest! {
        #[test]
        fn round_trip(alpha in 0.01f64..8.0, frac in 0.001f64..0.999) {
            let eps = if alpha < 1.0 { frac * epsilon_ceiling(alpha) } else { frac * 20.0 };
            let r = r_from_epsilon(alpha, eps).unwrap();
            prop_assert!(r > 1.0);
            let back = epsilon_bound_from_r(alpha, r).unwrap();
            prop_assert!((back - eps).abs() <= 1e-12 * eps.max(1.0));
        }

        #[test]
        fn bound_is_increasing_and_capped(alpha in 0.05f64..6.0, a in 0.001f64..0.99, b in 0.001f64..0.99) {
            let ceiling = if alpha < 1.0 { epsilon_ceiling(alpha) } else { 30.0 };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-3);
            let l_lo = regret_lower_bound(alpha, lo * ceiling, 0.1, 0.5).unwrap();
            let l_hi = regret_lower_bound(alpha, hi * ceiling, 0.1, 0.5).unwrap();
            prop_assert!(l_lo < l_hi || 0.05 - l_lo < 1e-12, "{l_lo} !< {l_hi}");
            prop_assert!(l_hi <= 0.05);
            let r = r_from_epsilon(alpha, hi * ceiling).unwrap();
            prop_assert!((l_hi - 0.05 * (1.0 - 1.0 / r)).abs() < 1e-12);
        }

        #[test]
        fn epsilon_decreasing_in_z(alpha in -3.0f64..0.99, z1 in 0.001f64..1.0, z2 in 0.001f64..1.0) {
            prop_assume!((z1 - z2).abs() > 1e-6);
            let (lo, hi) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
            prop_assert!(epsilon_from_z(alpha, lo).unwrap() > epsilon_from_z(alpha, hi).unwrap());
        }
    }
}

//! Closed-form steady-state moments and steering parameters of the two
//! adiabatically reduced models.
//!
//! Case 1 (fast atomic mode) requires equal cavity and mirror damping,
//! `κ = γ_m ≡ γ`. Case 2 (fast cavity mode) requires `γ_m = γ_a ≡ γ`. The
//! steering expressions additionally require equal bath occupations `n = n0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemParams;

const RATE_MATCH_TOL: f64 = 1e-12;

fn rates_match(x: f64, y: f64) -> bool {
    (x - y).abs() <= RATE_MATCH_TOL * x.abs().max(y.abs())
}

fn require_equal(name: &str, x: f64, y: f64) -> Result<()> {
    if rates_match(x, y) {
        Ok(())
    } else {
        Err(Error::UnsupportedParameters(format!("closed form requires {name} ({x} vs {y})")))
    }
}

/// Steady moments of the cavity–mirror pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case1Moments {
    /// Δ²X_a = Δ²P_a.
    pub var_xa: f64,
    /// Δ²X_b = Δ²P_b.
    pub var_xb: f64,
    /// ⟨X_a P_b⟩ = ⟨X_b P_a⟩.
    pub corr_xa_pb: f64,
}

/// Steady moments of the mirror–atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case2Moments {
    /// Δ²X_b = Δ²P_b.
    pub var_xb: f64,
    /// Δ²X_c = Δ²P_c.
    pub var_xc: f64,
    /// ⟨X_b X_c⟩ = −⟨P_b P_c⟩.
    pub corr_xb_xc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case1Steering {
    /// E_{a|b}: cavity steered by mirror.
    pub e_ab: f64,
    /// E_{b|a}: mirror steered by cavity.
    pub e_ba: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case2Steering {
    /// E_{c|b}: atoms steered by mirror.
    pub e_cb: f64,
    /// E_{b|c}: mirror steered by atoms.
    pub e_bc: f64,
}

/// Correlation strength against the steering and entanglement thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub corr: f64,
    pub steer_threshold: f64,
    pub ent_threshold: f64,
}

/// Slowest eigenvalue of the reduced-A drift, `−(Γ+γ_m)/2 + √(((Γ−γ_m)/2)² + g_m²)`
/// with `Γ = κ + C_a`.
pub fn case1_max_eigenvalue(p: &SystemParams) -> f64 {
    let big = p.kappa + p.c_a();
    let half_diff = 0.5 * (big - p.gamma_m);
    -0.5 * (big + p.gamma_m) + (half_diff * half_diff + p.g_m * p.g_m).sqrt()
}

fn case1_gamma(p: &SystemParams) -> Result<f64> {
    p.validate()?;
    require_equal("kappa == gamma_m", p.kappa, p.gamma_m)?;
    let gamma = p.kappa;
    let ca = p.c_a();
    if gamma * (gamma + ca) - p.g_m * p.g_m <= 0.0 {
        return Err(Error::Unstable { max_real_eigenvalue: case1_max_eigenvalue(p) });
    }
    Ok(gamma)
}

pub fn case1_moments(p: &SystemParams) -> Result<Case1Moments> {
    let gamma = case1_gamma(p)?;
    let ca = p.c_a();
    let g2 = p.g_m * p.g_m;
    let occ = p.n + p.n0 + 1.0;
    let den = (gamma + 0.5 * ca) * (gamma * (gamma + ca) - g2);
    Ok(Case1Moments {
        var_xa: (p.n + 0.5) + 0.5 * occ * gamma * g2 / den,
        var_xb: (p.n0 + 0.5) + 0.5 * occ * (gamma + ca) * g2 / den,
        corr_xa_pb: -0.5 * occ * gamma * (gamma + ca) * p.g_m / den,
    })
}

fn case2_gamma(p: &SystemParams) -> Result<(f64, f64)> {
    p.validate()?;
    require_equal("gamma_m == gamma_a", p.gamma_m, p.gamma_a)?;
    let gamma = p.gamma_m;
    let gamma_g = p.gamma_g(gamma);
    if gamma_g <= 0.0 {
        // the 2×2 invariant blocks have eigenvalues −γ and −γ_G
        return Err(Error::Unstable { max_real_eigenvalue: -gamma.min(gamma_g) });
    }
    Ok((gamma, gamma_g))
}

pub fn case2_moments(p: &SystemParams) -> Result<Case2Moments> {
    let (gamma, gamma_g) = case2_gamma(p)?;
    let (g, ga) = (p.big_g(), p.big_g_a());
    let occ = p.n + p.n0 + 1.0;
    let den = gamma_g * (gamma + gamma_g);
    Ok(Case2Moments {
        var_xb: (p.n0 + 0.5) + occ * 2.0 * g * (gamma_g + 0.5 * g) / den,
        var_xc: (p.n + 0.5) + occ * g * ga / den,
        corr_xb_xc: -occ * (g * ga).sqrt() * (gamma_g + g) / den,
    })
}

fn require_equal_occupation(p: &SystemParams) -> Result<()> {
    if p.n == p.n0 {
        Ok(())
    } else {
        Err(Error::UnsupportedParameters(format!("closed-form steering requires n == n0 (got {} and {})", p.n, p.n0)))
    }
}

pub fn steering_case1(p: &SystemParams) -> Result<Case1Steering> {
    let gamma = case1_gamma(p)?;
    require_equal_occupation(p)?;
    let ca = p.c_a();
    let g2 = p.g_m * p.g_m;
    let base = p.n0 + 0.5;
    let half = gamma + 0.5 * ca;
    let core = 2.0 * gamma * half * (gamma + ca);

    let den_ba = half * (core - ca * g2);
    if den_ba <= 0.0 {
        return Err(Error::Unstable { max_real_eigenvalue: case1_max_eigenvalue(p) });
    }
    let e_ab = base * (1.0 - gamma * ca * g2 / (half * (core + ca * g2)));
    let e_ba = base * (1.0 + ca * (gamma + ca) * g2 / den_ba);
    Ok(Case1Steering { e_ab, e_ba })
}

pub fn steering_case2(p: &SystemParams) -> Result<Case2Steering> {
    let (gamma, gamma_g) = case2_gamma(p)?;
    require_equal_occupation(p)?;
    let (g, ga) = (p.big_g(), p.big_g_a());
    let base = p.n0 + 0.5;
    let sum = gamma + gamma_g;

    let e_cb = base * (1.0 - 2.0 * g * ga * (ga - g) / (sum * (gamma_g * sum + 4.0 * g * (gamma_g + 0.5 * g))));
    let e_bc = base * (1.0 + 2.0 * g * (4.0 * gamma * gamma_g - g * (ga - g)) / (sum * (gamma_g * sum + 2.0 * g * ga)));
    Ok(Case2Steering { e_cb, e_bc })
}

/// `4γγ_G − G(G_a − G)`: negative (with `G_a > G`) marks the two-way steering regime.
pub fn case2_two_way_discriminant(p: &SystemParams) -> f64 {
    let gamma = p.gamma_m;
    4.0 * gamma * p.gamma_g(gamma) - p.big_g() * (p.big_g_a() - p.big_g())
}

pub fn thresholds_case1(p: &SystemParams) -> Result<Thresholds> {
    let m = case1_moments(p)?;
    // Δ²P_b = Δ²X_b here
    let var_pb = m.var_xb;
    Ok(Thresholds {
        corr: m.corr_xa_pb.abs(),
        steer_threshold: (var_pb * (m.var_xa - 0.5)).sqrt(),
        ent_threshold: ((var_pb - 0.5) * (m.var_xa - 0.5)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn case1(gamma: f64, ca: f64, g_m: f64, n: f64, n0: f64) -> SystemParams {
        // C_a = g_a²/γ_a with γ_a = 1
        SystemParams { kappa: gamma, gamma_m: gamma, gamma_a: 1.0, g_m, g_a: ca.sqrt(), n, n0, omega_m: None }
    }

    fn case2(gamma: f64, g: f64, ga: f64, n: f64, n0: f64) -> SystemParams {
        // κ = 1 so G = g_m², G_a = g_a²
        SystemParams { kappa: 1.0, gamma_m: gamma, gamma_a: gamma, g_m: g.sqrt(), g_a: ga.sqrt(), n, n0, omega_m: None }
    }

    #[test]
    fn case1_decoupled() {
        let m = case1_moments(&case1(1.0, 2.0, 0.0, 0.3, 1.1)).unwrap();
        assert_eq!(m.var_xa, 0.8);
        assert_abs_diff_eq!(m.var_xb, 1.6, epsilon = 1e-15);
        assert_eq!(m.corr_xa_pb, 0.0);
    }

    #[test]
    fn case1_hand_value() {
        let m = case1_moments(&case1(1.0, 0.0, 0.5, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(m.var_xa, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.var_xb, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn case1_auxiliary_asymmetry() {
        let m = case1_moments(&case1(1.0, 1.5, 0.8, 0.4, 0.4)).unwrap();
        assert!(m.var_xa < m.var_xb);
    }

    #[test]
    fn case1_errors() {
        let mut p = case1(1.0, 1.0, 0.5, 0.0, 0.0);
        p.gamma_m = 2.0;
        assert!(matches!(case1_moments(&p), Err(Error::UnsupportedParameters(_))));
        let p = case1(1.0, 0.5, 1.3, 0.0, 0.0);
        match case1_moments(&p) {
            Err(Error::Unstable { max_real_eigenvalue }) => assert!(max_real_eigenvalue > 0.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(steering_case1(&case1(1.0, 1.0, 0.5, 0.0, 1.0)), Err(Error::UnsupportedParameters(_))));
    }

    #[test]
    fn case2_decoupled_and_asymmetric() {
        let m = case2_moments(&case2(1.0, 0.0, 2.0, 0.5, 1.0)).unwrap();
        assert_eq!((m.var_xb, m.var_xc, m.corr_xb_xc), (1.5, 1.0, 0.0));
        let m = case2_moments(&case2(1.0, 0.7, 1.4, 0.2, 0.2)).unwrap();
        assert!(m.var_xc < m.var_xb);
        assert!(m.corr_xb_xc < 0.0);
    }

    #[test]
    fn case2_errors() {
        let mut p = case2(1.0, 0.5, 1.0, 0.0, 0.0);
        p.gamma_a = 1.5;
        assert!(matches!(case2_moments(&p), Err(Error::UnsupportedParameters(_))));
        match case2_moments(&case2(1.0, 2.0, 0.5, 0.0, 0.0)) {
            Err(Error::Unstable { max_real_eigenvalue }) => {
                assert_abs_diff_eq!(max_real_eigenvalue, 0.5, epsilon = 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_auxiliary_means_no_steering() {
        for (gm, n0) in [(0.3, 0.0), (0.9, 1.5), (0.01, 3.0)] {
            let e = steering_case1(&case1(1.0, 0.0, gm, n0, n0)).unwrap();
            assert_eq!(e.e_ab, n0 + 0.5);
            assert_eq!(e.e_ba, n0 + 0.5);
        }
    }

    #[test]
    fn case1_one_way() {
        let e = steering_case1(&case1(1.0, 1.0, 0.7, 0.0, 0.0)).unwrap();
        assert!(e.e_ab < 0.5 && e.e_ba > 0.5);
    }

    #[test]
    fn case1_peak_steering_near_unit_cooperativity() {
        let g_m = 0.25;
        let (best, _) = (1..=20_000)
            .map(|k| k as f64 * 5e-4)
            .map(|ca| (ca, steering_case1(&case1(1.0, ca, g_m, 0.0, 0.0)).unwrap().e_ab))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!((0.4..=1.6).contains(&best), "argmin {best}");
    }

    #[test]
    fn case2_regimes() {
        // G_a <= G: no steering of c by b
        let e = steering_case2(&case2(1.0, 0.8, 0.5, 0.0, 0.0)).unwrap();
        assert!(e.e_cb >= 0.5);
        // one-way: G = 0.5, G_a = 2 -> 4 gamma gamma_G = 10 > G (G_a - G) = 0.75
        let p = case2(1.0, 0.5, 2.0, 0.0, 0.0);
        assert!(case2_two_way_discriminant(&p) > 0.0);
        let e = steering_case2(&p).unwrap();
        assert!(e.e_cb < 0.5 && e.e_bc > 0.5);
        // two-way: G = 5, G_a = 12 -> 4*8 = 32 < 5*7 = 35
        let p = case2(1.0, 5.0, 12.0, 0.0, 0.0);
        assert!(case2_two_way_discriminant(&p) < 0.0);
        let e = steering_case2(&p).unwrap();
        assert!(e.e_cb < 0.5 && e.e_bc < 0.5);
    }

    #[test]
    fn thresholds_without_auxiliary() {
        for g_m in [0.1, 0.5, 0.9] {
            let t = thresholds_case1(&case1(1.0, 0.0, g_m, 0.0, 0.0)).unwrap();
            assert_abs_diff_eq!(t.corr, t.steer_threshold, epsilon = 1e-12);
            assert!(t.corr > t.ent_threshold);
        }
    }

    proptest! {
        #[test]
        fn entanglement_threshold_below_steering_threshold(
            ca in 0.0f64..10.0, frac in 0.0f64..0.99, n in 0.0f64..3.0, n0 in 0.0f64..3.0,
        ) {
            let g_m = frac * (1.0 + ca).sqrt();
            let t = thresholds_case1(&case1(1.0, ca, g_m, n, n0)).unwrap();
            prop_assert!(t.ent_threshold <= t.steer_threshold);
        }

        #[test]
        fn reverse_steering_never_below_vacuum_offset(
            ca in 0.0f64..10.0, frac in 0.0f64..0.99, n in 0.0f64..3.0,
        ) {
            let g_m = frac * (1.0 + ca).sqrt();
            let e = steering_case1(&case1(1.0, ca, g_m, n, n)).unwrap();
            prop_assert!(e.e_ba >= n + 0.5);
        }

        #[test]
        fn case1_moment_invariants(
            ca in 0.0f64..10.0, frac in 0.01f64..0.99, n in 0.0f64..3.0, n0 in 0.0f64..3.0,
        ) {
            let g_m = frac * (1.0 + ca).sqrt();
            let m = case1_moments(&case1(1.0, ca, g_m, n, n0)).unwrap();
            prop_assert!(m.var_xa >= 0.5 && m.var_xb >= 0.5);
            prop_assert!(m.corr_xa_pb <= 0.0);
        }
    }

    #[test]
    fn small_cooperativity_limit() {
        let e = steering_case1(&case1(1.0, 1e-12, 0.6, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(e.e_ab, 0.5, epsilon = 1e-11);
        assert_abs_diff_eq!(e.e_ba, 0.5, epsilon = 1e-11);
    }
}

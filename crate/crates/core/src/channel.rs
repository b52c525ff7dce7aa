//! Per-link formulas: blockage LoS probabilities, THz pathlosses with
//! molecular absorption, the exponential / non-central χ² fading parameters,
//! and the interference fading MGF.
//!
//! Pathlosses and the signal-power rates have log-domain twins (`ln_*`). With
//! N = 10¹³ RIS elements the rate of the RIS signal power is built from
//! products around 10⁻²⁶, and at large AP–RIS distances it overflows the
//! linear domain entirely; the analytical engine works from the logs.

use std::f64::consts::PI;

use crate::config::{NetworkConfig, SPEED_OF_LIGHT};
use crate::quadrature::log_add_exp;

/// Mean of the product of two independent unit Rayleigh magnitudes.
pub const MU_B: f64 = PI / 2.0;
/// Variance of the product of two independent unit Rayleigh magnitudes.
pub const SIGMA_B_SQ: f64 = 4.0 * (1.0 - PI * PI / 16.0);

/// LoS probability of an AP–UE link at 2D distance `r`.
pub fn p_los_direct(cfg: &NetworkConfig, r: f64) -> f64 {
    (-cfg.beta_d() * r).exp()
}

/// LoS probability of the RIS–UE link.
pub fn p_los_ris_ue(cfg: &NetworkConfig) -> f64 {
    (-cfg.beta_r() * cfg.v0).exp()
}

/// LoS probability of an AP–RIS link at 2D distance `z`. A RIS above the
/// blockages always sees the APs.
pub fn p_los_ap_ris(cfg: &NetworkConfig, z: f64) -> f64 {
    if cfg.is_low_ris() {
        (-cfg.beta_ar() * z).exp()
    } else {
        1.0
    }
}

fn ln_free_space_factor(cfg: &NetworkConfig) -> f64 {
    (cfg.g_u * cfg.g_a).ln() + 2.0 * (SPEED_OF_LIGHT / (4.0 * PI * cfg.freq)).ln()
}

/// Direct-link pathloss (linear power gain) at 2D distance `r`.
pub fn pathloss_direct(cfg: &NetworkConfig, r: f64) -> f64 {
    let d2 = r * r + cfg.hat_a() * cfg.hat_a();
    let lambda_term = SPEED_OF_LIGHT / (4.0 * PI * cfg.freq);
    cfg.g_u * cfg.g_a * lambda_term * lambda_term * (-cfg.k_abs * d2.sqrt()).exp() / d2
}

/// `ln` of [`pathloss_direct`].
pub fn ln_pathloss_direct(cfg: &NetworkConfig, r: f64) -> f64 {
    let d2 = r * r + cfg.hat_a() * cfg.hat_a();
    ln_free_space_factor(cfg) - cfg.k_abs * d2.sqrt() - d2.ln()
}

/// Vertical AP–RIS offset.
fn ap_ris_drop(cfg: &NetworkConfig) -> f64 {
    cfg.hat_a() - cfg.hat_r()
}

/// Incidence factor cos²θ of an AP at 2D distance `z` from the RIS.
pub fn incidence_factor(cfg: &NetworkConfig, z: f64) -> f64 {
    let dh2 = ap_ris_drop(cfg).powi(2);
    dh2 / (z * z + dh2)
}

/// AP–RIS–UE pathloss at AP–RIS 2D distance `z`, including the active-RIS
/// gain `g_ris` (1 for a passive panel).
pub fn pathloss_ris(cfg: &NetworkConfig, z: f64) -> f64 {
    let dh2 = ap_ris_drop(cfg).powi(2);
    let d_ar2 = z * z + dh2;
    let d_ru2 = cfg.v0 * cfg.v0 + cfg.hat_r() * cfg.hat_r();
    let area = cfg.l_x * cfg.l_y;
    cfg.g_ris * cfg.g_u * cfg.g_a * area * area / ((4.0 * PI).powi(2) * d_ar2 * d_ru2)
        * (-cfg.k_abs * d_ar2.sqrt()).exp()
        * (-cfg.k_abs * d_ru2.sqrt()).exp()
        * incidence_factor(cfg, z)
}

/// `ln` of [`pathloss_ris`].
pub fn ln_pathloss_ris(cfg: &NetworkConfig, z: f64) -> f64 {
    let dh2 = ap_ris_drop(cfg).powi(2);
    let d_ar2 = z * z + dh2;
    let d_ru2 = cfg.v0 * cfg.v0 + cfg.hat_r() * cfg.hat_r();
    (cfg.g_ris * cfg.g_u * cfg.g_a).ln() + 2.0 * (cfg.l_x * cfg.l_y).ln()
        - 2.0 * (4.0 * PI).ln()
        - d_ar2.ln()
        - d_ru2.ln()
        - cfg.k_abs * d_ar2.sqrt()
        - cfg.k_abs * d_ru2.sqrt()
        + dh2.ln()
        - d_ar2.ln()
}

/// Position of an AP relative to the UE and the RIS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGeometry {
    /// AP–UE 2D distance.
    pub r: f64,
    /// AP–RIS 2D distance.
    pub z: f64,
    /// Angle at the UE between the AP and the RIS, in [0, π].
    pub phi: f64,
}

impl LinkGeometry {
    /// Builds the geometry from the AP's distance and angle seen from the UE
    /// (cosine rule).
    pub fn from_polar(cfg: &NetworkConfig, r: f64, phi: f64) -> Self {
        Self {
            r,
            z: ap_ris_distance(cfg.v0, r, phi),
            phi,
        }
    }
}

/// AP–RIS 2D distance for an AP at `(r, phi)` and a RIS at distance `v0`.
pub fn ap_ris_distance(v0: f64, r: f64, phi: f64) -> f64 {
    (r * r + v0 * v0 - 2.0 * r * v0 * phi.cos()).max(0.0).sqrt()
}

/// Fading-law parameters for a given serving geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalDistParams {
    /// Rate of the exponential direct-link gain |h·f|².
    pub kappa_d: f64,
    /// Rate of the exponential RIS-link signal power.
    pub kappa_r: f64,
    /// Rate of the exponential composite-link signal power.
    pub kappa_c: f64,
    /// Non-centrality of the χ²₁ through-RIS interference fading.
    pub kappa_i: f64,
    pub mu_b: f64,
    pub sigma_b_sq: f64,
}

/// κ_D = 1 / (2 (Σ|f_j|²)²).
pub fn kappa_d(cfg: &NetworkConfig) -> f64 {
    1.0 / (2.0 * cfg.sum_precoder_sq().powi(2))
}

/// κ_I = μ_B / (2 C σ_B²), C = Σ|f_j|.
pub fn kappa_i(cfg: &NetworkConfig) -> f64 {
    MU_B / (2.0 * cfg.sum_precoder() * SIGMA_B_SQ)
}

/// `ln κ_R(z0)` with κ_R = 1 / (2 N² (P_A PL_R(z0) Σ|f_j|²)²).
pub fn ln_kappa_r(cfg: &NetworkConfig, z0: f64) -> f64 {
    -std::f64::consts::LN_2
        - 2.0 * cfg.n_elements.ln()
        - 2.0 * (cfg.p_a.ln() + ln_pathloss_ris(cfg, z0) + cfg.sum_precoder_sq().ln())
}

/// `ln κ_C(r0, z0)` with κ_C = 1 / (√2 (N PL_R(z0) + PL_D(r0)) Σ|f_j|²)².
pub fn ln_kappa_c(cfg: &NetworkConfig, r0: f64, z0: f64) -> f64 {
    let ln_gain = log_add_exp(
        cfg.n_elements.ln() + ln_pathloss_ris(cfg, z0),
        ln_pathloss_direct(cfg, r0),
    );
    -std::f64::consts::LN_2 - 2.0 * (ln_gain + cfg.sum_precoder_sq().ln())
}

/// All fading parameters, evaluated in the linear domain.
pub fn dist_params(cfg: &NetworkConfig, r0: f64, z0: f64) -> SignalDistParams {
    let sum_sq = cfg.sum_precoder_sq();
    let n = cfg.n_elements;
    let pl_r = pathloss_ris(cfg, z0);
    let pl_d = pathloss_direct(cfg, r0);
    SignalDistParams {
        kappa_d: kappa_d(cfg),
        kappa_r: 1.0 / (2.0 * n * n * (cfg.p_a * pl_r * sum_sq).powi(2)),
        kappa_c: 1.0 / (std::f64::consts::SQRT_2 * (n * pl_r + pl_d) * sum_sq).powi(2),
        kappa_i: kappa_i(cfg),
        mu_b: MU_B,
        sigma_b_sq: SIGMA_B_SQ,
    }
}

/// Laplace transform of the χ²₁ interference fading with non-centrality
/// `kappa_i`: `(1 + 2x)^(-1/2) · exp(-κ_I x / (1 + 2x))`.
pub fn mgf_q(kappa_i: f64, x: f64) -> f64 {
    ln_mgf_q(kappa_i, x).exp()
}

pub fn ln_mgf_q(kappa_i: f64, x: f64) -> f64 {
    let d = 1.0 + 2.0 * x;
    -0.5 * (2.0 * x).ln_1p() - kappa_i * x / d
}

/// `1 − Q(x)` without cancellation for small `x`.
pub fn one_minus_mgf_q(kappa_i: f64, x: f64) -> f64 {
    -ln_mgf_q(kappa_i, x).exp_m1()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::config::reference_config;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Frozen 40-digit reference values (independent arbitrary-precision evaluation).
    const PL_D_AT_0: f64 = 1.360_739_540_554_834_862_8e-3;
    const PL_R_AT_0: f64 = 1.616_118_319_844_220_409_9e-10;
    const PL_R_AT_2: f64 = 2.213_948_478_597_951_549_9e-12;
    const KAPPA_R_AT_0: f64 = 1.914_360_381_009_996_354_9e-3;
    const KAPPA_C_AT_1_1: f64 = 1.228_517_015_707_567_924_5e-7;
    const KAPPA_I_REF: f64 = 5.124_616_516_017_412_898_2e-2;

    #[test]
    fn direct_los() {
        let cfg = reference_config();
        assert_eq!(p_los_direct(&cfg, 0.0), 1.0);
        assert_relative_eq!(p_los_direct(&cfg, 5.0), 0.250_073_601_112_094_1, epsilon = 1e-15);
        let clear = cfg.with("lambda_b", 0.0).unwrap();
        assert_eq!(p_los_direct(&clear, 7.3), 1.0);
    }

    #[test]
    fn ris_ue_los() {
        let cfg = reference_config();
        assert_relative_eq!(p_los_ris_ue(&cfg), 0.534_068_057_744_189_1, epsilon = 1e-15);
        assert_eq!(p_los_ris_ue(&cfg.with("lambda_b", 0.0).unwrap()), 1.0);
        assert!(p_los_ris_ue(&cfg.with("v0", 1e4).unwrap()) < 1e-300);
    }

    #[test]
    fn ap_ris_los() {
        let high = reference_config();
        assert_eq!(p_los_ap_ris(&high, 3.0), 1.0);
        let low = high.with("h_r", 1.2).unwrap();
        assert_eq!(p_los_ap_ris(&low, 0.0), 1.0);
        assert_relative_eq!(p_los_ap_ris(&low, 3.0), 0.532_236_858_133_663_0, epsilon = 1e-15);
    }

    #[test]
    fn direct_pathloss_reference() {
        let cfg = reference_config();
        assert_relative_eq!(pathloss_direct(&cfg, 0.0), PL_D_AT_0, max_relative = 1e-13);
        assert!(pathloss_direct(&cfg, 1e4) < 1e-300);
    }

    #[test]
    fn direct_pathloss_without_absorption_is_spreading_only() {
        let cfg = reference_config()
            .with("k_abs", 0.0)
            .unwrap()
            .with("g_a", 1.0)
            .unwrap()
            .with("g_u", 1.0)
            .unwrap();
        let lam = SPEED_OF_LIGHT / (4.0 * PI * cfg.freq);
        for r in [0.0, 0.5, 3.0, 11.0] {
            assert_relative_eq!(pathloss_direct(&cfg, r), lam * lam / (r * r + 4.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn ris_pathloss_reference() {
        let cfg = reference_config();
        assert_eq!(incidence_factor(&cfg, 0.0), 1.0);
        assert_relative_eq!(pathloss_ris(&cfg, 0.0), PL_R_AT_0, max_relative = 1e-13);
        assert_relative_eq!(pathloss_ris(&cfg, 2.0), PL_R_AT_2, max_relative = 1e-13);
    }

    #[test]
    fn active_ris_gain_is_linear() {
        let passive = reference_config();
        let active = passive.with("g_ris_db", 30.0).unwrap();
        for z in [0.0, 0.7, 4.0, 15.0] {
            assert_relative_eq!(pathloss_ris(&active, z), 1e3 * pathloss_ris(&passive, z), max_relative = 1e-13);
        }
    }

    #[test]
    fn fading_parameters() {
        let cfg = reference_config();
        let p = dist_params(&cfg, 1.0, 1.0);
        assert_relative_eq!(p.kappa_d, 0.005, epsilon = 1e-18);
        assert_relative_eq!(p.kappa_i, KAPPA_I_REF, max_relative = 1e-14);
        assert_relative_eq!(p.kappa_c, KAPPA_C_AT_1_1, max_relative = 1e-12);
        assert_relative_eq!(dist_params(&cfg, 0.0, 0.0).kappa_r, KAPPA_R_AT_0, max_relative = 1e-12);
        assert_eq!(p.mu_b, MU_B);
        assert_relative_eq!(p.sigma_b_sq, 4.0 * (1.0 - PI * PI / 16.0));
    }

    #[test]
    fn kappa_r_inverse_square_in_pathloss_and_power() {
        let cfg = reference_config();
        let base = dist_params(&cfg, 1.0, 2.0).kappa_r;
        // Four times the RIS pathloss via the active gain.
        let louder = cfg.with("g_ris", 4.0).unwrap();
        assert_relative_eq!(dist_params(&louder, 1.0, 2.0).kappa_r, base / 16.0, max_relative = 1e-12);
        let stronger = cfg.with("p_a", 3.0 * cfg.p_a).unwrap();
        assert_relative_eq!(dist_params(&stronger, 1.0, 2.0).kappa_r, base / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn mgf_values() {
        assert_eq!(mgf_q(0.05, 0.0), 1.0);
        assert_eq!(one_minus_mgf_q(0.05, 0.0), 0.0);
        assert_relative_eq!(mgf_q(0.05143, 1.0), 0.567_536_918_187_628_2, epsilon = 1e-15);
        assert!(mgf_q(0.05, 1e300) < 1e-140);
        let tiny = 1e-15;
        assert_relative_eq!(one_minus_mgf_q(0.05, tiny), tiny * 1.05, max_relative = 1e-9);
    }

    #[test]
    fn q_is_log_convex_and_decreasing_on_grid() {
        let ki = KAPPA_I_REF;
        let xs: Vec<f64> = (0..400).map(|i| 0.05 * i as f64).collect();
        let lq: Vec<f64> = xs.iter().map(|&x| ln_mgf_q(ki, x)).collect();
        for w in lq.windows(3) {
            assert!(w[1] < w[0]);
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn log_domain_agrees_with_linear() {
        let cfg = reference_config();
        for &(r, z) in &[(0.0, 0.0), (0.3, 1.2), (2.0, 3.5), (9.0, 10.0)] {
            assert_relative_eq!(ln_pathloss_direct(&cfg, r).exp(), pathloss_direct(&cfg, r), max_relative = 1e-12);
            assert_relative_eq!(ln_pathloss_ris(&cfg, z).exp(), pathloss_ris(&cfg, z), max_relative = 1e-12);
            let p = dist_params(&cfg, r, z);
            assert_relative_eq!(ln_kappa_r(&cfg, z).exp(), p.kappa_r, max_relative = 1e-12);
            assert_relative_eq!(ln_kappa_c(&cfg, r, z).exp(), p.kappa_c, max_relative = 1e-12);
        }
    }

    #[test]
    fn log_domain_survives_where_linear_overflows() {
        let cfg = reference_config();
        // κ_R at 5 km exceeds f64 range in the linear product.
        let l = ln_kappa_r(&cfg, 5000.0);
        assert!(l.is_finite() && l > 709.0);
    }

    #[test]
    fn geometry_cosine_rule() {
        let cfg = reference_config();
        let g = LinkGeometry::from_polar(&cfg, 1.0, PI / 2.0);
        assert_relative_eq!(g.z, 3f64.sqrt(), epsilon = 1e-15);
        let g0 = LinkGeometry::from_polar(&cfg, cfg.v0, 0.0);
        assert!(g0.z.abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn pathlosses_decrease_with_distance(a in 0.0f64..30.0, d in 1e-3f64..5.0) {
            let cfg = reference_config();
            prop_assert!(pathloss_direct(&cfg, a + d) < pathloss_direct(&cfg, a));
            prop_assert!(pathloss_ris(&cfg, a + d) < pathloss_ris(&cfg, a));
            prop_assert!(pathloss_direct(&cfg, a) > 0.0 && pathloss_ris(&cfg, a) > 0.0);
            let f = incidence_factor(&cfg, a);
            prop_assert!(f > 0.0 && f <= 1.0);
        }

        #[test]
        fn los_probabilities_monotone(lb in 0.0f64..5.0, rb in 0.05f64..0.5, r in 0.0f64..20.0, dr in 0.0f64..5.0) {
            let cfg = reference_config().with("lambda_b", lb).unwrap().with("r_b", rb).unwrap();
            let denser = cfg.with("lambda_b", lb + 0.5).unwrap();
            let wider = cfg.with("r_b", rb + 0.1).unwrap();
            let p = p_los_direct(&cfg, r);
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert!(p_los_direct(&cfg, r + dr) <= p);
            prop_assert!(p_los_direct(&denser, r) <= p);
            prop_assert!(p_los_direct(&wider, r) <= p);
            prop_assert!(p_los_ris_ue(&denser) <= p_los_ris_ue(&cfg));
        }

        #[test]
        fn kappas_increase_with_ris_distance(r0 in 0.0f64..10.0, z in 0.0f64..20.0, dz in 0.01f64..5.0) {
            let cfg = reference_config();
            let a = dist_params(&cfg, r0, z);
            let b = dist_params(&cfg, r0, z + dz);
            prop_assert!(b.kappa_r > a.kappa_r);
            prop_assert!(b.kappa_c > a.kappa_c);
            prop_assert!(a.kappa_r.is_finite() && a.kappa_c > 0.0);
        }

        #[test]
        fn kappa_r_power_scaling(a in 0.1f64..100.0) {
            let cfg = reference_config();
            let scaled = cfg.with("p_a", cfg.p_a * a).unwrap();
            let k0 = dist_params(&cfg, 1.0, 1.0).kappa_r;
            let k1 = dist_params(&scaled, 1.0, 1.0).kappa_r;
            prop_assert!((k1 * a * a / k0 - 1.0).abs() < 1e-12);
        }
    }
}

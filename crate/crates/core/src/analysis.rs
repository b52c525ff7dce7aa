//! Analytical coverage engine.
//!
//! The serving AP is the nearest one, at distance r0 with density
//! `2πλ r0 exp(−λπ r0²)` (the unbounded-PPP law; the mass beyond the disk,
//! `exp(−λπR²)`, counts as no coverage) and azimuth φ0 uniform on [0, π]
//! relative to the UE→RIS axis. Interferers form a PPP on the annulus
//! r ∈ [r0, R]. Every Laplace transform is `exp(−c · ∫…)` with the exponent
//! integral evaluated by adaptive quadrature, taking `ln s` as input so that
//! the huge rates produced by κ_R never overflow.
//!
//! The through-RIS transform integrates φ over [0, π] and doubles it (cosine
//! symmetry of the AP–RIS distance), so its prefactor is `2λ`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    ap_ris_distance, kappa_d, kappa_i, ln_kappa_c, ln_kappa_r, ln_pathloss_direct,
    ln_pathloss_ris, one_minus_mgf_q, p_los_direct, p_los_ris_ue,
};
use crate::config::{NetworkConfig, RisPlacement};
use crate::exec::Exec;
use crate::quadrature::{integrate_1d_with, integrate_2d_with, QuadError, QuadOptions, DEFAULT_MAX_EVALS};

/// Absolute tolerance on each Laplace-transform value.
pub const LT_TOLERANCE: f64 = 1e-6;
/// Absolute tolerance on the total coverage probability.
pub const COVERAGE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("operation needs a {} configuration, got {}", expected.as_str(), actual.as_str())]
    ScenarioMismatch {
        expected: RisPlacement,
        actual: RisPlacement,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

fn require(cfg: &NetworkConfig, expected: RisPlacement) -> Result<(), AnalysisError> {
    if cfg.placement() == expected {
        Ok(())
    } else {
        Err(AnalysisError::ScenarioMismatch {
            expected,
            actual: cfg.placement(),
        })
    }
}

/// Probabilities (or estimates) of the four association outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AssociationBreakdown<T = f64> {
    pub direct: T,
    pub ris: T,
    pub composite: T,
    pub none: T,
}

impl AssociationBreakdown<f64> {
    pub fn sum(&self) -> f64 {
        self.direct + self.ris + self.composite + self.none
    }

    pub fn served(&self) -> f64 {
        self.direct + self.ris + self.composite
    }
}

/// Low-RIS association with the direct outcome split by which RIS hop failed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowRisAssociation {
    /// Direct link up, RIS–UE up, AP–RIS blocked.
    pub direct_ap_ris_blocked: f64,
    /// Direct link up, RIS–UE blocked.
    pub direct_ris_ue_blocked: f64,
    pub breakdown: AssociationBreakdown,
}

/// Association probabilities for a serving AP at `r0` when the RIS is above
/// the blockages.
pub fn association(cfg: &NetworkConfig, r0: f64) -> Result<AssociationBreakdown, AnalysisError> {
    require(cfg, RisPlacement::HighRis)?;
    Ok(association_any(cfg, r0))
}

/// The high-RIS association formulas applied to any configuration.
pub fn association_any(cfg: &NetworkConfig, r0: f64) -> AssociationBreakdown {
    let pd = p_los_direct(cfg, r0);
    let pr = p_los_ris_ue(cfg);
    AssociationBreakdown {
        direct: pd * (1.0 - pr),
        ris: (1.0 - pd) * pr,
        composite: pd * pr,
        none: (1.0 - pd) * (1.0 - pr),
    }
}

/// Association probabilities when the AP–RIS hop can be blocked too.
pub fn association_low_ris(cfg: &NetworkConfig, r0: f64, z0: f64) -> Result<LowRisAssociation, AnalysisError> {
    require(cfg, RisPlacement::LowRis)?;
    Ok(association_low_ris_any(cfg, r0, z0))
}

/// The low-RIS association formulas applied to any configuration.
pub fn association_low_ris_any(cfg: &NetworkConfig, r0: f64, z0: f64) -> LowRisAssociation {
    let pd = p_los_direct(cfg, r0);
    let pr = p_los_ris_ue(cfg);
    let par = (-cfg.beta_ar() * z0).exp();
    let d1 = pd * pr * (1.0 - par);
    let d2 = pd * (1.0 - pr);
    let ris = (1.0 - pd) * pr * par;
    let composite = pd * pr * par;
    LowRisAssociation {
        direct_ap_ris_blocked: d1,
        direct_ris_ue_blocked: d2,
        breakdown: AssociationBreakdown {
            direct: d1 + d2,
            ris,
            composite,
            none: (1.0 - pd) * (1.0 - pr * par),
        },
    }
}

/// Density of the distance to the nearest AP.
pub fn nearest_ap_pdf(lambda_a: f64, r0: f64) -> f64 {
    2.0 * PI * lambda_a * r0 * (-lambda_a * PI * r0 * r0).exp()
}

/// One Laplace-transform evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LtValue {
    pub value: f64,
    /// Absolute error bound propagated from the exponent integral.
    pub error_estimate: f64,
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum LtKind {
    Direct,
    Ris,
    RisThinned,
}

type CacheSlot = Arc<OnceLock<Result<LtValue, QuadError>>>;

/// Evaluates and memoizes the interference Laplace transforms of one
/// configuration.
///
/// Entries are keyed on the exact bits of `(ln s, r0)` and computed once, so
/// concurrent callers always observe the same value and the evaluation tally
/// does not depend on scheduling.
pub struct LaplaceEvaluator<'a> {
    cfg: &'a NetworkConfig,
    tolerance: f64,
    max_evals: u64,
    ln_pa: f64,
    ln_kappa_d: f64,
    kappa_i: f64,
    cache: Mutex<HashMap<(LtKind, u64, u64), CacheSlot>>,
    evaluations: AtomicU64,
    max_error: AtomicU64,
}

impl<'a> LaplaceEvaluator<'a> {
    pub fn new(cfg: &'a NetworkConfig) -> Self {
        Self::with_tolerance(cfg, LT_TOLERANCE)
    }

    pub fn with_tolerance(cfg: &'a NetworkConfig, tolerance: f64) -> Self {
        Self {
            cfg,
            tolerance,
            max_evals: DEFAULT_MAX_EVALS,
            ln_pa: cfg.p_a.ln(),
            ln_kappa_d: kappa_d(cfg).ln(),
            kappa_i: kappa_i(cfg),
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicU64::new(0),
            max_error: AtomicU64::new(0f64.to_bits()),
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        self.cfg
    }

    /// Integrand evaluations spent on distinct transforms so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Largest error bound among the transforms computed so far.
    pub fn max_error(&self) -> f64 {
        f64::from_bits(self.max_error.load(Ordering::Relaxed))
    }

    /// Transform of the interference from APs with unblocked direct links.
    pub fn direct(&self, s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.direct_ln(s.ln(), r0)
    }

    /// Transform of the through-RIS interference from all other APs.
    pub fn ris(&self, s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.ris_ln(s.ln(), r0)
    }

    /// Through-RIS transform with AP–RIS links thinned by blockages.
    pub fn ris_thinned(&self, s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.ris_thinned_ln(s.ln(), r0)
    }

    pub fn direct_ln(&self, ln_s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.cached(LtKind::Direct, ln_s, r0)
    }

    pub fn ris_ln(&self, ln_s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.cached(LtKind::Ris, ln_s, r0)
    }

    pub fn ris_thinned_ln(&self, ln_s: f64, r0: f64) -> Result<LtValue, QuadError> {
        self.cached(LtKind::RisThinned, ln_s, r0)
    }

    /// Composite-link transform: direct times through-RIS.
    pub fn composite(&self, s: f64, r0: f64) -> Result<LtValue, QuadError> {
        let d = self.direct(s, r0)?;
        let r = self.ris(s, r0)?;
        Ok(LtValue {
            value: d.value * r.value,
            error_estimate: d.error_estimate + r.error_estimate,
            evaluations: d.evaluations + r.evaluations,
        })
    }

    fn cached(&self, kind: LtKind, ln_s: f64, r0: f64) -> Result<LtValue, QuadError> {
        let key = (kind, ln_s.to_bits(), r0.to_bits());
        let slot = {
            let mut map = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            map.entry(key).or_default().clone()
        };
        slot.get_or_init(|| {
            let r = self.compute(kind, ln_s, r0);
            if let Ok(v) = &r {
                self.evaluations.fetch_add(v.evaluations, Ordering::Relaxed);
                self.max_error.fetch_max(v.error_estimate.to_bits(), Ordering::Relaxed);
            }
            r
        })
        .clone()
    }

    fn compute(&self, kind: LtKind, ln_s: f64, r0: f64) -> Result<LtValue, QuadError> {
        let cfg = self.cfg;
        if ln_s == f64::NEG_INFINITY || r0 >= cfg.radius {
            return Ok(LtValue {
                value: 1.0,
                error_estimate: 0.0,
                evaluations: 0,
            });
        }
        let (prefactor, exponent) = match kind {
            LtKind::Direct => (2.0 * PI * cfg.lambda_a, self.direct_exponent(ln_s, r0)?),
            LtKind::Ris => (2.0 * cfg.lambda_a, self.ris_exponent(ln_s, r0, false)?),
            LtKind::RisThinned => (2.0 * cfg.lambda_a, self.ris_exponent(ln_s, r0, true)?),
        };
        let value = (-prefactor * exponent.value).exp();
        Ok(LtValue {
            value,
            error_estimate: value * prefactor * exponent.error_estimate,
            evaluations: exponent.evaluations,
        })
    }

    fn direct_exponent(&self, ln_s: f64, r0: f64) -> Result<crate::quadrature::QuadResult, QuadError> {
        let cfg = self.cfg;
        let ln_scale = ln_s + self.ln_pa - self.ln_kappa_d;
        let integrand = |r: f64| {
            // x/(κ_D + x) with x = s P_A PL_D(r), written as a logistic in ln(x/κ_D).
            let ln_ratio = ln_scale + ln_pathloss_direct(cfg, r);
            let weight = 1.0 / (1.0 + (-ln_ratio).exp());
            Ok::<_, QuadError>(weight * p_los_direct(cfg, r) * r)
        };
        let tol = self.tolerance / (2.0 * PI * cfg.lambda_a);
        let opts = QuadOptions::new(tol).with_max_evals(self.max_evals);
        integrate_1d_with(integrand, &radial_points(r0, cfg.radius, None), &opts)
    }

    fn ris_exponent(
        &self,
        ln_s: f64,
        r0: f64,
        thinned: bool,
    ) -> Result<crate::quadrature::QuadResult, QuadError> {
        let cfg = self.cfg;
        let ln_scale = ln_s + self.ln_pa;
        let beta_ar = if thinned { cfg.beta_ar() } else { 0.0 };
        let kappa_i = self.kappa_i;
        let integrand = |r: f64, phi: f64| {
            let z = ap_ris_distance(cfg.v0, r, phi);
            let x = (ln_scale + ln_pathloss_ris(cfg, z)).exp();
            let thin = if beta_ar > 0.0 { (-beta_ar * z).exp() } else { 1.0 };
            Ok::<_, QuadError>(one_minus_mgf_q(kappa_i, x) * thin * r)
        };
        let tol = self.tolerance / (2.0 * cfg.lambda_a);
        let opts = QuadOptions::new(tol).with_max_evals(self.max_evals);
        integrate_2d_with(
            integrand,
            &radial_points(r0, cfg.radius, Some(cfg.v0)),
            &[0.0, PI / 8.0, PI],
            &opts,
        )
    }
}

/// Breakpoints for a radial integral over `[lo, hi]`, with an optional extra
/// point where the integrand peaks.
fn radial_points(lo: f64, hi: f64, peak: Option<f64>) -> Vec<f64> {
    let mut pts = vec![lo];
    if let Some(p) = peak {
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.push(hi);
    pts
}

/// `L_ID(s)` conditioned on the serving distance `r0`.
pub fn lt_interference_direct(cfg: &NetworkConfig, s: f64, r0: f64) -> Result<f64, AnalysisError> {
    Ok(LaplaceEvaluator::new(cfg).direct(s, r0)?.value)
}

/// `L_IR(s)` conditioned on the serving distance `r0`.
pub fn lt_interference_ris(cfg: &NetworkConfig, s: f64, r0: f64) -> Result<f64, AnalysisError> {
    Ok(LaplaceEvaluator::new(cfg).ris(s, r0)?.value)
}

/// `L_I'R(s)`: the through-RIS transform with blockable AP–RIS links.
pub fn lt_interference_ris_low(cfg: &NetworkConfig, s: f64, r0: f64) -> Result<f64, AnalysisError> {
    require(cfg, RisPlacement::LowRis)?;
    Ok(LaplaceEvaluator::new(cfg).ris_thinned(s, r0)?.value)
}

/// `L_IC(s) = L_ID(s) · L_IR(s)`.
pub fn lt_interference_composite(cfg: &NetworkConfig, s: f64, r0: f64) -> Result<f64, AnalysisError> {
    Ok(LaplaceEvaluator::new(cfg).composite(s, r0)?.value)
}

/// Conditional coverage of the three high-RIS outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalCoverage<T = f64> {
    pub direct: T,
    pub ris: T,
    pub composite: T,
}

/// Conditional coverage of the four low-RIS outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowRisConditionalCoverage {
    pub direct_ap_ris_blocked: f64,
    pub direct_ris_ue_blocked: f64,
    pub ris: f64,
    pub composite: f64,
}

/// Total coverage with per-outcome contributions and integration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverageResult {
    pub total: f64,
    pub contrib_direct: f64,
    pub contrib_ris: f64,
    pub contrib_composite: f64,
    pub quad_error_estimate: f64,
    pub evaluations: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct EngineOptions {
    pub coverage_tolerance: f64,
    pub lt_tolerance: f64,
    pub exec: Exec,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            coverage_tolerance: COVERAGE_TOLERANCE,
            lt_tolerance: LT_TOLERANCE,
            exec: Exec::Parallel,
        }
    }
}

/// Evaluates conditional and total coverage for one configuration, sharing
/// one transform cache across all calls.
pub struct AnalyticEngine<'a> {
    cfg: &'a NetworkConfig,
    lt: LaplaceEvaluator<'a>,
    opts: EngineOptions,
    ln_tau: f64,
    ln_kappa_d: f64,
}

impl<'a> AnalyticEngine<'a> {
    pub fn new(cfg: &'a NetworkConfig) -> Self {
        Self::with_options(cfg, EngineOptions::default())
    }

    pub fn with_options(cfg: &'a NetworkConfig, opts: EngineOptions) -> Self {
        Self {
            cfg,
            lt: LaplaceEvaluator::with_tolerance(cfg, opts.lt_tolerance),
            opts,
            ln_tau: cfg.tau.ln(),
            ln_kappa_d: kappa_d(cfg).ln(),
        }
    }

    pub fn laplace(&self) -> &LaplaceEvaluator<'a> {
        &self.lt
    }

    /// `ln` of the transform argument for a direct-link serving signal.
    pub fn ln_s_direct(&self, r0: f64) -> f64 {
        self.ln_tau + self.ln_kappa_d - self.cfg.p_a.ln() - ln_pathloss_direct(self.cfg, r0)
    }

    pub fn ln_s_ris(&self, z0: f64) -> f64 {
        self.ln_tau + ln_kappa_r(self.cfg, z0)
    }

    pub fn ln_s_composite(&self, r0: f64, z0: f64) -> f64 {
        self.ln_tau + ln_kappa_c(self.cfg, r0, z0)
    }

    fn p_direct(&self, r0: f64) -> Result<f64, QuadError> {
        Ok(self.lt.direct_ln(self.ln_s_direct(r0), r0)?.value)
    }

    fn p_ris(&self, r0: f64, z0: f64, thinned: bool) -> Result<f64, QuadError> {
        let ln_s = self.ln_s_ris(z0);
        let d = self.lt.direct_ln(ln_s, r0)?.value;
        let r = if thinned {
            self.lt.ris_thinned_ln(ln_s, r0)?
        } else {
            self.lt.ris_ln(ln_s, r0)?
        };
        Ok(d * r.value)
    }

    fn p_composite(&self, r0: f64, z0: f64, thinned: bool) -> Result<f64, QuadError> {
        let ln_s = self.ln_s_composite(r0, z0);
        let d = self.lt.direct_ln(ln_s, r0)?.value;
        let r = if thinned {
            self.lt.ris_thinned_ln(ln_s, r0)?
        } else {
            self.lt.ris_ln(ln_s, r0)?
        };
        Ok(d * r.value)
    }

    fn p_direct_with_ris(&self, r0: f64) -> Result<f64, QuadError> {
        let ln_s = self.ln_s_direct(r0);
        Ok(self.lt.direct_ln(ln_s, r0)?.value * self.lt.ris_thinned_ln(ln_s, r0)?.value)
    }

    /// High-RIS conditional coverage for a serving AP at `(r0, phi0)`.
    pub fn conditional(&self, r0: f64, phi0: f64) -> Result<ConditionalCoverage, QuadError> {
        let z0 = ap_ris_distance(self.cfg.v0, r0, phi0);
        Ok(ConditionalCoverage {
            direct: self.p_direct(r0)?,
            ris: self.p_ris(r0, z0, false)?,
            composite: self.p_composite(r0, z0, false)?,
        })
    }

    /// Low-RIS conditional coverage for a serving AP at `(r0, phi0)`.
    pub fn conditional_low(&self, r0: f64, phi0: f64) -> Result<LowRisConditionalCoverage, QuadError> {
        let z0 = ap_ris_distance(self.cfg.v0, r0, phi0);
        Ok(LowRisConditionalCoverage {
            direct_ap_ris_blocked: self.p_direct(r0)?,
            direct_ris_ue_blocked: self.p_direct_with_ris(r0)?,
            ris: self.p_ris(r0, z0, true)?,
            composite: self.p_composite(r0, z0, true)?,
        })
    }

    fn r0_points(&self) -> Vec<f64> {
        let rt = self.cfg.radius;
        let scale = 1.0 / (PI * self.cfg.lambda_a).sqrt();
        let mut pts = vec![0.0];
        for k in [0.5, 1.0, 2.0, 4.0] {
            let p = k * scale;
            if p < rt {
                pts.push(p);
            }
        }
        pts.push(rt);
        pts
    }

    /// `∫_0^R f_r0(r0) g(r0) dr0`.
    fn radial_term<G>(&self, tol: f64, g: G) -> Result<crate::quadrature::QuadResult, QuadError>
    where
        G: Fn(f64) -> Result<f64, QuadError> + Sync,
    {
        let lambda_a = self.cfg.lambda_a;
        let opts = QuadOptions::new(tol).with_exec(self.opts.exec);
        integrate_1d_with(
            |r0| Ok(nearest_ap_pdf(lambda_a, r0) * g(r0)?),
            &self.r0_points(),
            &opts,
        )
    }

    /// `(1/π) ∫_0^π ∫_0^R f_r0(r0) g(r0, φ0) dr0 dφ0`.
    fn angular_term<G>(&self, tol: f64, g: G) -> Result<crate::quadrature::QuadResult, QuadError>
    where
        G: Fn(f64, f64) -> Result<f64, QuadError> + Sync,
    {
        let lambda_a = self.cfg.lambda_a;
        let opts = QuadOptions::new(tol)
            .with_exec(self.opts.exec)
            .with_max_evals(u64::MAX / 4);
        integrate_2d_with(
            |phi0, r0| Ok(nearest_ap_pdf(lambda_a, r0) * g(r0, phi0)? / PI),
            &[0.0, PI / 4.0, PI],
            &self.r0_points(),
            &opts,
        )
    }

    fn finish(&self, terms: [(f64, f64, u64); 3]) -> CoverageResult {
        let [d, r, c] = terms;
        let total = d.0 + r.0 + c.0;
        // Each integrand carries at most two transforms of bounded error.
        let lt_err = 2.0 * self.lt.max_error();
        CoverageResult {
            total,
            contrib_direct: d.0,
            contrib_ris: r.0,
            contrib_composite: c.0,
            quad_error_estimate: d.1 + r.1 + c.1 + lt_err,
            evaluations: d.2 + r.2 + c.2 + self.lt.evaluations(),
        }
    }

    /// Total coverage from the high-RIS outcome decomposition, applied to any
    /// configuration.
    pub fn high_ris_coverage(&self) -> Result<CoverageResult, QuadError> {
        let cfg = self.cfg;
        let tol = self.opts.coverage_tolerance / 3.0;
        let pr = p_los_ris_ue(cfg);
        let direct = self.radial_term(tol, |r0| {
            let a = association_any(cfg, r0).direct;
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_direct(r0)?)
        })?;
        let ris = self.angular_term(tol, |r0, phi0| {
            let a = (1.0 - p_los_direct(cfg, r0)) * pr;
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_ris(r0, ap_ris_distance(cfg.v0, r0, phi0), false)?)
        })?;
        let composite = self.angular_term(tol, |r0, phi0| {
            let a = p_los_direct(cfg, r0) * pr;
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_composite(r0, ap_ris_distance(cfg.v0, r0, phi0), false)?)
        })?;
        Ok(self.finish([
            (direct.value, direct.error_estimate, direct.evaluations),
            (ris.value, ris.error_estimate, ris.evaluations),
            (composite.value, composite.error_estimate, composite.evaluations),
        ]))
    }

    /// Total coverage from the low-RIS four-outcome decomposition, applied to
    /// any configuration.
    pub fn low_ris_coverage(&self) -> Result<CoverageResult, QuadError> {
        let cfg = self.cfg;
        let tol = self.opts.coverage_tolerance / 4.0;
        let pr = p_los_ris_ue(cfg);
        let beta_ar = cfg.beta_ar();
        let d1 = self.angular_term(tol, |r0, phi0| {
            let z0 = ap_ris_distance(cfg.v0, r0, phi0);
            let a = p_los_direct(cfg, r0) * pr * (1.0 - (-beta_ar * z0).exp());
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_direct(r0)?)
        })?;
        let d2 = self.radial_term(tol, |r0| {
            let a = p_los_direct(cfg, r0) * (1.0 - pr);
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_direct_with_ris(r0)?)
        })?;
        let ris = self.angular_term(tol, |r0, phi0| {
            let z0 = ap_ris_distance(cfg.v0, r0, phi0);
            let a = (1.0 - p_los_direct(cfg, r0)) * pr * (-beta_ar * z0).exp();
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_ris(r0, z0, true)?)
        })?;
        let composite = self.angular_term(tol, |r0, phi0| {
            let z0 = ap_ris_distance(cfg.v0, r0, phi0);
            let a = p_los_direct(cfg, r0) * pr * (-beta_ar * z0).exp();
            if a == 0.0 {
                return Ok(0.0);
            }
            Ok(a * self.p_composite(r0, z0, true)?)
        })?;
        Ok(self.finish([
            (
                d1.value + d2.value,
                d1.error_estimate + d2.error_estimate,
                d1.evaluations + d2.evaluations,
            ),
            (ris.value, ris.error_estimate, ris.evaluations),
            (composite.value, composite.error_estimate, composite.evaluations),
        ]))
    }

    /// Coverage by whichever decomposition matches the RIS placement.
    pub fn coverage(&self) -> Result<CoverageResult, QuadError> {
        match self.cfg.placement() {
            RisPlacement::HighRis => self.high_ris_coverage(),
            RisPlacement::LowRis => self.low_ris_coverage(),
        }
    }

    /// Association probabilities averaged over the serving-AP position. The
    /// `none` entry absorbs the probability of no AP inside the disk.
    pub fn association_mass(&self) -> Result<AssociationBreakdown, QuadError> {
        let cfg = self.cfg;
        let tol = 1e-10;
        let (direct, ris, composite) = if cfg.is_low_ris() {
            let term = |pick: fn(&LowRisAssociation) -> f64| {
                self.angular_term(tol, move |r0, phi0| {
                    let z0 = ap_ris_distance(cfg.v0, r0, phi0);
                    Ok(pick(&association_low_ris_any(cfg, r0, z0)))
                })
            };
            (
                term(|a| a.breakdown.direct)?.value,
                term(|a| a.breakdown.ris)?.value,
                term(|a| a.breakdown.composite)?.value,
            )
        } else {
            let term = |pick: fn(&AssociationBreakdown) -> f64| {
                self.radial_term(tol, move |r0| Ok(pick(&association_any(cfg, r0))))
            };
            (
                term(|a| a.direct)?.value,
                term(|a| a.ris)?.value,
                term(|a| a.composite)?.value,
            )
        };
        Ok(AssociationBreakdown {
            direct,
            ris,
            composite,
            none: 1.0 - direct - ris - composite,
        })
    }
}

/// High-RIS conditional coverage `(P_D, P_R, P_C)` at `(r0, phi0)`.
pub fn conditional_coverage(cfg: &NetworkConfig, r0: f64, phi0: f64) -> Result<ConditionalCoverage, AnalysisError> {
    Ok(AnalyticEngine::new(cfg).conditional(r0, phi0)?)
}

/// Total coverage of a high-RIS configuration.
pub fn coverage(cfg: &NetworkConfig) -> Result<CoverageResult, AnalysisError> {
    require(cfg, RisPlacement::HighRis)?;
    Ok(AnalyticEngine::new(cfg).high_ris_coverage()?)
}

/// Total coverage of a low-RIS configuration.
pub fn coverage_low_ris(cfg: &NetworkConfig) -> Result<CoverageResult, AnalysisError> {
    require(cfg, RisPlacement::LowRis)?;
    Ok(AnalyticEngine::new(cfg).low_ris_coverage()?)
}

/// Total coverage, dispatched on the RIS placement.
pub fn coverage_auto(cfg: &NetworkConfig, exec: Exec) -> Result<CoverageResult, AnalysisError> {
    let opts = EngineOptions {
        exec,
        ..EngineOptions::default()
    };
    Ok(AnalyticEngine::with_options(cfg, opts).coverage()?)
}

/// Serving-position-averaged association probabilities.
pub fn association_mass(cfg: &NetworkConfig) -> Result<AssociationBreakdown, AnalysisError> {
    Ok(AnalyticEngine::new(cfg).association_mass()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_config;
    use approx::assert_relative_eq;

    #[test]
    fn unblocked_network_always_composite() {
        let cfg = reference_config().with("lambda_b", 0.0).unwrap();
        let a = association(&cfg, 2.0).unwrap();
        assert_eq!(a, AssociationBreakdown { direct: 0.0, ris: 0.0, composite: 1.0, none: 0.0 });
    }

    #[test]
    fn far_serving_ap_leaves_only_ris() {
        let cfg = reference_config();
        let a = association(&cfg, 1e3).unwrap();
        assert!(a.direct < 1e-100 && a.composite < 1e-100);
        assert_relative_eq!(a.ris, 0.534_068_057_744_189_1, epsilon = 1e-15);
        assert_relative_eq!(a.none, 1.0 - 0.534_068_057_744_189_1, epsilon = 1e-15);
    }

    #[test]
    fn association_partitions_unity() {
        let cfg = reference_config();
        for r0 in [0.0, 0.3, 1.0, 4.0, 11.0] {
            assert!((association(&cfg, r0).unwrap().sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn association_checks_placement() {
        let low = reference_config().with("h_r", 1.2).unwrap();
        assert!(matches!(association(&low, 1.0), Err(AnalysisError::ScenarioMismatch { .. })));
        let high = reference_config();
        assert!(matches!(association_low_ris(&high, 1.0, 1.0), Err(AnalysisError::ScenarioMismatch { .. })));
        assert!(matches!(coverage(&low), Err(AnalysisError::ScenarioMismatch { .. })));
        assert!(matches!(coverage_low_ris(&high), Err(AnalysisError::ScenarioMismatch { .. })));
    }

    #[test]
    fn low_ris_association_fixture() {
        let cfg = reference_config().with("h_r", 1.2).unwrap();
        let a = association_low_ris(&cfg, 2.0, 2.0).unwrap();
        let b = a.breakdown;
        for p in [b.direct, b.ris, b.composite, b.none] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!((b.sum() - 1.0).abs() < 1e-12);
        // Independent evaluation of the three link probabilities.
        let pd = (-cfg.beta_d() * 2.0).exp();
        let pr = (-cfg.beta_r() * cfg.v0).exp();
        let par = (-cfg.beta_ar() * 2.0).exp();
        assert_relative_eq!(b.composite, pd * pr * par, epsilon = 1e-15);
        assert_relative_eq!(b.direct, pd * (1.0 - pr * par), epsilon = 1e-15);
        assert_relative_eq!(a.direct_ap_ris_blocked, pd * pr * (1.0 - par), epsilon = 1e-15);
    }

    #[test]
    fn low_ris_association_reduces_at_boundary() {
        let cfg = reference_config().with("h_r", cfg_h_b()).unwrap();
        assert!(cfg.is_low_ris());
        for r0 in [0.1, 1.0, 3.0] {
            let low = association_low_ris(&cfg, r0, 2.5).unwrap();
            assert_eq!(low.direct_ap_ris_blocked, 0.0);
            let high = association_any(&cfg, r0);
            let b = low.breakdown;
            for (x, y) in [(b.direct, high.direct), (b.ris, high.ris), (b.composite, high.composite), (b.none, high.none)] {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    fn cfg_h_b() -> f64 {
        reference_config().h_b
    }

    #[test]
    fn low_ris_unblocked_is_composite() {
        let cfg = reference_config().with("h_r", 1.2).unwrap().with("lambda_b", 0.0).unwrap();
        let a = association_low_ris(&cfg, 3.0, 4.0).unwrap();
        assert_eq!(a.breakdown.composite, 1.0);
    }

    #[test]
    fn transforms_at_zero_are_one() {
        let cfg = reference_config();
        assert_eq!(lt_interference_direct(&cfg, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(lt_interference_ris(&cfg, 0.0, 1.0).unwrap(), 1.0);
        let low = cfg.with("h_r", 1.2).unwrap();
        assert_eq!(lt_interference_ris_low(&low, 0.0, 1.0).unwrap(), 1.0);
        assert!(lt_interference_ris_low(&cfg, 1.0, 1.0).is_err());
    }

    #[test]
    fn sparse_network_barely_interferes() {
        let cfg = reference_config().with("lambda_a", 1e-9).unwrap();
        let l = lt_interference_direct(&cfg, 1e6, 1.0).unwrap();
        assert!((1.0 - l) < 1e-6);
        let l = lt_interference_ris(&cfg, 1e16, 1.0).unwrap();
        assert!((1.0 - l) < 1e-6);
    }

    #[test]
    fn distant_ris_barely_interferes() {
        let cfg = reference_config().with("v0", 1e4).unwrap();
        assert!((1.0 - lt_interference_ris(&cfg, 1e14, 1.0).unwrap()) < 1e-9);
    }

    #[test]
    fn transforms_in_unit_interval_and_non_increasing() {
        let cfg = reference_config();
        let low = cfg.with("h_r", 1.2).unwrap();
        let ev = LaplaceEvaluator::new(&cfg);
        let ev_low = LaplaceEvaluator::new(&low);
        let mut prev = [1.0f64; 3];
        for k in 0..16 {
            let s_d = 10f64.powf(1.0 + 0.5 * k as f64);
            let s_r = 10f64.powf(10.0 + 0.5 * k as f64);
            let vals = [
                ev.direct(s_d, 0.5).unwrap().value,
                ev.ris(s_r, 0.5).unwrap().value,
                ev_low.ris_thinned(s_r, 0.5).unwrap().value,
            ];
            for (v, p) in vals.iter().zip(prev.iter()) {
                assert!(*v > 0.0 && *v <= 1.0);
                assert!(*v <= *p + 1e-12, "{v} > {p}");
            }
            prev = vals;
        }
    }

    #[test]
    fn thinning_only_removes_interferers() {
        let low = reference_config().with("h_r", 1.2).unwrap();
        let ev = LaplaceEvaluator::new(&low);
        for s in [1e12, 1e13, 1e14, 1e15] {
            for r0 in [0.2, 1.0] {
                assert!(ev.ris_thinned(s, r0).unwrap().value >= ev.ris(s, r0).unwrap().value - 1e-12);
            }
        }
    }

    #[test]
    fn thinned_equals_plain_without_ap_ris_blockage() {
        let cfg = reference_config().with("h_r", 1.63).unwrap();
        let ev = LaplaceEvaluator::new(&cfg);
        for s in [1e13, 1e14] {
            let a = ev.ris_thinned(s, 0.7).unwrap().value;
            let b = ev.ris(s, 0.7).unwrap().value;
            assert!((a - b).abs() < 2e-6);
        }
    }

    #[test]
    fn composite_is_product() {
        let cfg = reference_config();
        let ev = LaplaceEvaluator::new(&cfg);
        for s in [1e3, 1e8, 1e13, 1e14] {
            let c = ev.composite(s, 0.8).unwrap().value;
            // Independent composition from the two exponents.
            let d = LaplaceEvaluator::new(&cfg).direct(s, 0.8).unwrap().value.ln();
            let r = LaplaceEvaluator::new(&cfg).ris(s, 0.8).unwrap().value.ln();
            assert_relative_eq!(c, (d + r).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn cache_returns_identical_values() {
        let cfg = reference_config();
        let ev = LaplaceEvaluator::new(&cfg);
        let a = ev.direct(1e4, 0.5).unwrap();
        let n = ev.evaluations();
        let b = ev.direct(1e4, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.evaluations(), n);
    }

    #[test]
    fn no_interference_means_full_conditional_coverage() {
        let cfg = reference_config().with("lambda_a", 1e-12).unwrap();
        let c = conditional_coverage(&cfg, 1.0, PI / 2.0).unwrap();
        for p in [c.direct, c.ris, c.composite] {
            assert!((1.0 - p) < 1e-6);
        }
    }

    #[test]
    fn huge_threshold_kills_conditional_coverage() {
        let cfg = reference_config().with("tau_db", 200.0).unwrap();
        let c = conditional_coverage(&cfg, 1.0, PI / 2.0).unwrap();
        for p in [c.direct, c.ris, c.composite] {
            assert!(p < 1e-6, "{p}");
        }
    }
}

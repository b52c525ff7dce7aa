//! Monte-Carlo engine.
//!
//! Each realization draws its own network from a ChaCha8 stream selected by
//! `(seed, realization index)`, so a run is reproducible no matter how the
//! realizations are spread over threads. Estimates are built from integer
//! tallies or from per-chunk sums folded in chunk order.
//!
//! Geometry: the disk is centered at the origin, the UE sits at
//! `(ue_offset, 0)` and the RIS at `UE + v0·(−1, 1)/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AssociationBreakdown, ConditionalCoverage};
use crate::channel::{
    kappa_d, kappa_i, ln_kappa_c, ln_kappa_r, p_los_ap_ris, p_los_direct, p_los_ris_ue, pathloss_direct,
    pathloss_ris,
};
use crate::config::NetworkConfig;
use crate::exec::Exec;

/// Largest RIS size accepted by the full-channel mode.
pub const FULL_CHANNEL_MAX_ELEMENTS: f64 = 1e4;
/// Largest AP array accepted by the full-channel mode.
pub const FULL_CHANNEL_MAX_ANTENNAS: usize = 64;

/// Realizations handled per work item.
const CHUNK: usize = 2048;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum McError {
    #[error(
        "full-channel mode needs N <= {FULL_CHANNEL_MAX_ELEMENTS} and N_A <= {FULL_CHANNEL_MAX_ANTENNAS}, got N = {n_elements}, N_A = {n_antennas}"
    )]
    ModeUnavailable { n_elements: f64, n_antennas: usize },
    #[error("at least one realization is required")]
    NoRealizations,
}

/// How signal and interference powers are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Fading drawn from the exponential and non-central χ²₁ laws.
    #[default]
    Distribution,
    /// Entrywise complex Gaussian channels with the RIS phases matched to `g`.
    FullChannel,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Distribution => "distribution",
            Mode::FullChannel => "full-channel",
        }
    }

    pub fn check(self, cfg: &NetworkConfig) -> Result<(), McError> {
        if self == Mode::FullChannel
            && (cfg.n_elements > FULL_CHANNEL_MAX_ELEMENTS || cfg.n_antennas > FULL_CHANNEL_MAX_ANTENNAS)
        {
            return Err(McError::ModeUnavailable {
                n_elements: cfg.n_elements,
                n_antennas: cfg.n_antennas,
            });
        }
        Ok(())
    }
}

/// One draw of the network around the reference UE.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub ue: [f64; 2],
    pub ris: [f64; 2],
    pub ap_positions: Vec<[f64; 2]>,
    /// 2D AP–UE distances.
    pub dist_ue: Vec<f64>,
    /// 2D AP–RIS distances.
    pub dist_ris: Vec<f64>,
    pub direct_los: Vec<bool>,
    /// AP–RIS link state; always true when the RIS is above the blockages.
    pub ap_ris_los: Vec<bool>,
    pub ris_ue_los: bool,
    /// Index of the nearest AP, if any.
    pub serving: Option<usize>,
    /// Direct-link fading gains, Exp(κ_D).
    pub direct_fading: Vec<f64>,
    /// Through-RIS fading, non-central χ²₁(κ_I).
    pub ris_fading: Vec<f64>,
    /// Unit-mean exponential for the serving signal.
    pub signal_fading: f64,
}

/// Which links carry the serving AP's signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Association {
    Direct,
    Ris,
    Composite,
    None,
}

/// The RNG stream for one realization.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn ue_and_ris(cfg: &NetworkConfig) -> ([f64; 2], [f64; 2]) {
    let ue = [cfg.ue_offset, 0.0];
    let d = cfg.v0 * FRAC_1_SQRT_2;
    (ue, [ue[0] - d, ue[1] + d])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as usize,
        Err(_) => 0,
    }
}

/// Non-central χ²₁ draw with non-centrality `kappa_i`.
fn noncentral_chi2<R: Rng + ?Sized>(kappa_i: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (z + kappa_i.sqrt()).powi(2)
}

/// Draws one complete network.
pub fn sample_realization<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Realization {
    let (ue, ris) = ue_and_ris(cfg);
    let count = poisson(cfg.mean_ap_count(), rng);
    let kd = kappa_d(cfg);
    let ki = kappa_i(cfg);
    let mut real = Realization {
        ue,
        ris,
        ap_positions: Vec::with_capacity(count),
        dist_ue: Vec::with_capacity(count),
        dist_ris: Vec::with_capacity(count),
        direct_los: Vec::with_capacity(count),
        ap_ris_los: Vec::with_capacity(count),
        ris_ue_los: false,
        serving: None,
        direct_fading: Vec::with_capacity(count),
        ris_fading: Vec::with_capacity(count),
        signal_fading: 0.0,
    };
    let mut best = f64::INFINITY;
    for m in 0..count {
        let rho = cfg.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        let p = [rho * theta.cos(), rho * theta.sin()];
        let r = dist(p, ue);
        let z = dist(p, ris);
        real.direct_los.push(rng.random::<f64>() < p_los_direct(cfg, r));
        real.ap_ris_los.push(rng.random::<f64>() < p_los_ap_ris(cfg, z));
        let g: f64 = Exp1.sample(rng);
        real.direct_fading.push(g / kd);
        real.ris_fading.push(noncentral_chi2(ki, rng));
        if r < best {
            best = r;
            real.serving = Some(m);
        }
        real.ap_positions.push(p);
        real.dist_ue.push(r);
        real.dist_ris.push(z);
    }
    real.ris_ue_los = rng.random::<f64>() < p_los_ris_ue(cfg);
    real.signal_fading = Exp1.sample(rng);
    real
}

/// Link states of the serving AP: (direct, usable RIS path).
fn serving_links(real: &Realization) -> Option<(usize, bool, bool)> {
    let s = real.serving?;
    Some((s, real.direct_los[s], real.ris_ue_los && real.ap_ris_los[s]))
}

/// Association outcome of a realization.
pub fn classify(_cfg: &NetworkConfig, real: &Realization) -> Association {
    match serving_links(real) {
        None => Association::None,
        Some((_, true, true)) => Association::Composite,
        Some((_, true, false)) => Association::Direct,
        Some((_, false, true)) => Association::Ris,
        Some((_, false, false)) => Association::None,
    }
}

/// Aggregate interference powers seen by the UE, excluding the serving AP.
/// `I_R` is zero when the RIS–UE link is blocked.
fn interference(cfg: &NetworkConfig, real: &Realization, serving: usize) -> (f64, f64) {
    let mut i_d = 0.0;
    let mut i_r = 0.0;
    for m in 0..real.ap_positions.len() {
        if m == serving {
            continue;
        }
        if real.direct_los[m] {
            i_d += cfg.p_a * pathloss_direct(cfg, real.dist_ue[m]) * real.direct_fading[m];
        }
        if real.ris_ue_los && real.ap_ris_los[m] {
            i_r += cfg.p_a * pathloss_ris(cfg, real.dist_ris[m]) * real.ris_fading[m];
        }
    }
    (i_d, i_r)
}

/// SIR of the serving link. Unserved UEs get 0; a UE without interferers
/// gets `+∞`.
pub fn sir_sample<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    real: &Realization,
    mode: Mode,
    rng: &mut R,
) -> Result<f64, McError> {
    mode.check(cfg)?;
    let assoc = classify(cfg, real);
    let Some(s) = real.serving else {
        return Ok(0.0);
    };
    if assoc == Association::None {
        return Ok(0.0);
    }
    let r0 = real.dist_ue[s];
    let z0 = real.dist_ris[s];
    let (signal, interf) = match mode {
        Mode::Distribution => {
            let (i_d, i_r) = interference(cfg, real, s);
            let e = real.signal_fading;
            match assoc {
                Association::Direct => (cfg.p_a * pathloss_direct(cfg, r0) * e / kappa_d(cfg), i_d + i_r),
                Association::Ris => (e * (-ln_kappa_r(cfg, z0)).exp(), i_d + i_r),
                Association::Composite => (e * (-ln_kappa_c(cfg, r0, z0)).exp(), i_d + i_r),
                Association::None => unreachable!(),
            }
        }
        Mode::FullChannel => full_channel_sir_parts(cfg, real, s, assoc, rng),
    };
    if interf <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal / interf)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    fn mul(self, o: C64) -> C64 {
        C64 {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn scale(self, k: f64) -> C64 {
        C64 {
            re: self.re * k,
            im: self.im * k,
        }
    }

    fn add(self, o: C64) -> C64 {
        C64 {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// CN(0, 1) draw.
fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64 {
        re: re * FRAC_1_SQRT_2,
        im: im * FRAC_1_SQRT_2,
    }
}

/// Effective RIS combining weights `gᵀ diag(g/‖g‖)`, i.e. `g_i² / ‖g‖`.
fn ris_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let g: Vec<C64> = (0..n).map(|_| cn(rng)).collect();
    let norm = g.iter().map(|c| c.norm_sq()).sum::<f64>().sqrt();
    g.iter().map(|c| c.mul(*c).scale(1.0 / norm)).collect()
}

/// `hᵀ f` with a fresh `h`.
fn direct_coefficient<R: Rng + ?Sized>(f: &[f64], rng: &mut R) -> C64 {
    f.iter().fold(C64::default(), |acc, &fj| acc.add(cn(rng).scale(fj)))
}

/// `w · (H f)` with a fresh `H`.
fn ris_coefficient<R: Rng + ?Sized>(w: &[C64], f: &[f64], rng: &mut R) -> C64 {
    w.iter().fold(C64::default(), |acc, &wi| acc.add(wi.mul(direct_coefficient(f, rng))))
}

fn full_channel_sir_parts<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    real: &Realization,
    serving: usize,
    assoc: Association,
    rng: &mut R,
) -> (f64, f64) {
    let n = cfg.n_elements.round() as usize;
    let f = &cfg.precoder_mags;
    let r0 = real.dist_ue[serving];
    let z0 = real.dist_ris[serving];
    let w = ris_weights(n, rng);
    let a_d = direct_coefficient(f, rng);
    let a_r = ris_coefficient(&w, f, rng);
    let pl_d = pathloss_direct(cfg, r0);
    let pl_r = pathloss_ris(cfg, z0);
    let signal = match assoc {
        Association::Direct => cfg.p_a * pl_d * a_d.norm_sq(),
        Association::Ris => cfg.p_a * pl_r * a_r.norm_sq(),
        _ => cfg.p_a * a_d.scale(pl_d.sqrt()).add(a_r.scale(pl_r.sqrt())).norm_sq(),
    };
    let mut interf = 0.0;
    for m in 0..real.ap_positions.len() {
        if m == serving {
            continue;
        }
        if real.direct_los[m] {
            interf += cfg.p_a * pathloss_direct(cfg, real.dist_ue[m]) * direct_coefficient(f, rng).norm_sq();
        }
        if real.ris_ue_los && real.ap_ris_los[m] {
            interf += cfg.p_a * pathloss_ris(cfg, real.dist_ris[m]) * ris_coefficient(&w, f, rng).norm_sq();
        }
    }
    (signal, interf)
}

/// Empirical probability with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_count(count: u64, n: u64, seed: u64) -> Self {
        let value = count as f64 / n as f64;
        Self {
            value,
            stderr: (value * (1.0 - value) / n as f64).sqrt(),
            n,
            seed,
        }
    }
}

/// Coverage and association frequencies of one Monte-Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub coverage: McEstimate,
    pub association: AssociationBreakdown<McEstimate>,
}

fn chunks(n: u64) -> usize {
    n.div_ceil(CHUNK as u64) as usize
}

fn chunk_range(c: usize, n: u64) -> std::ops::Range<u64> {
    let lo = (c * CHUNK) as u64;
    lo..(lo + CHUNK as u64).min(n)
}

/// Estimates coverage `P(SIR > τ)` and the association frequencies from `n`
/// independent network draws.
pub fn estimate(cfg: &NetworkConfig, n: u64, mode: Mode, seed: u64, exec: Exec) -> Result<McReport, McError> {
    if n == 0 {
        return Err(McError::NoRealizations);
    }
    mode.check(cfg)?;
    // [covered, direct, ris, composite, none]
    let tallies = exec.map(chunks(n), |c| {
        let mut t = [0u64; 5];
        for i in chunk_range(c, n) {
            let mut rng = realization_rng(seed, i);
            let real = sample_realization(cfg, &mut rng);
            let assoc = classify(cfg, &real);
            t[1 + assoc as usize] += 1;
            if assoc != Association::None {
                let sir = sir_sample(cfg, &real, mode, &mut rng).expect("mode checked above");
                if sir > cfg.tau {
                    t[0] += 1;
                }
            }
        }
        t
    });
    let mut total = [0u64; 5];
    for t in &tallies {
        for (acc, x) in total.iter_mut().zip(t) {
            *acc += x;
        }
    }
    let est = |k: u64| McEstimate::from_count(k, n, seed);
    Ok(McReport {
        coverage: est(total[0]),
        association: AssociationBreakdown {
            direct: est(total[1]),
            ris: est(total[2]),
            composite: est(total[3]),
            none: est(total[4]),
        },
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Interference component targeted by [`lt_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterferenceKind {
    /// APs with an unblocked direct link.
    Direct,
    /// All APs through the RIS.
    Ris,
    /// APs with an unblocked AP–RIS link, through the RIS.
    RisThinned,
}

/// Interferers on the annulus `[r0, R]` around a UE at the origin, with the
/// RIS at `v0·(−1, 1)/√2`. Returns the aggregate power of `kind`.
fn annulus_interference<R: Rng + ?Sized>(cfg: &NetworkConfig, r0: f64, kind: InterferenceKind, rng: &mut R) -> f64 {
    let r_out2 = cfg.radius * cfg.radius;
    let r_in2 = (r0 * r0).min(r_out2);
    let count = poisson(cfg.lambda_a * PI * (r_out2 - r_in2), rng);
    let d = cfg.v0 * FRAC_1_SQRT_2;
    let ris = [-d, d];
    let kd = kappa_d(cfg);
    let ki = kappa_i(cfg);
    let mut total = 0.0;
    for _ in 0..count {
        let rho = (r_in2 + (r_out2 - r_in2) * rng.random::<f64>()).sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        let u: f64 = rng.random();
        match kind {
            InterferenceKind::Direct => {
                let g: f64 = Exp1.sample(rng);
                if u < p_los_direct(cfg, rho) {
                    total += cfg.p_a * pathloss_direct(cfg, rho) * g / kd;
                }
            }
            InterferenceKind::Ris | InterferenceKind::RisThinned => {
                let z = dist([rho * theta.cos(), rho * theta.sin()], ris);
                let zeta = noncentral_chi2(ki, rng);
                let keep = kind == InterferenceKind::Ris || u < p_los_ap_ris(cfg, z);
                if keep {
                    total += cfg.p_a * pathloss_ris(cfg, z) * zeta;
                }
            }
        }
    }
    total
}

fn fold_means(parts: &[(Vec<f64>, Vec<f64>)], len: usize, n: u64) -> Vec<MeanEstimate> {
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    for (s, q) in parts {
        for k in 0..len {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    let nf = n as f64;
    (0..len)
        .map(|k| {
            let mean = sum[k] / nf;
            let var = ((sum_sq[k] / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
            MeanEstimate {
                mean,
                stderr: (var / nf).sqrt(),
                n,
            }
        })
        .collect()
}

/// Monte-Carlo estimate of `E[exp(−s I)]` for each `s` in `s_grid`, with the
/// serving AP at distance `r0` and the remaining APs a PPP on `[r0, R]`.
pub fn lt_oracle(
    cfg: &NetworkConfig,
    r0: f64,
    kind: InterferenceKind,
    s_grid: &[f64],
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<MeanEstimate>, McError> {
    if n == 0 {
        return Err(McError::NoRealizations);
    }
    let len = s_grid.len();
    let parts = exec.map(chunks(n), |c| {
        let mut s = vec![0.0; len];
        let mut q = vec![0.0; len];
        for i in chunk_range(c, n) {
            let mut rng = realization_rng(seed, i);
            let total = annulus_interference(cfg, r0, kind, &mut rng);
            for (k, &sv) in s_grid.iter().enumerate() {
                let v = (-sv * total).exp();
                s[k] += v;
                q[k] += v * v;
            }
        }
        (s, q)
    });
    Ok(fold_means(&parts, len, n))
}

/// Monte-Carlo conditional coverage for a serving AP fixed at `(r0, phi0)`
/// (azimuth measured from the UE→RIS axis), using the high- or low-RIS
/// interference sets implied by the configuration.
pub fn conditional_coverage_mc(
    cfg: &NetworkConfig,
    r0: f64,
    phi0: f64,
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<ConditionalCoverage<McEstimate>, McError> {
    if n == 0 {
        return Err(McError::NoRealizations);
    }
    let z0 = crate::channel::ap_ris_distance(cfg.v0, r0, phi0);
    let kd = kappa_d(cfg);
    let s_direct = cfg.p_a * pathloss_direct(cfg, r0) / kd;
    let s_ris = (-ln_kappa_r(cfg, z0)).exp();
    let s_comp = (-ln_kappa_c(cfg, r0, z0)).exp();
    let ris_kind = if cfg.is_low_ris() {
        InterferenceKind::RisThinned
    } else {
        InterferenceKind::Ris
    };
    let tallies = exec.map(chunks(n), |c| {
        let mut t = [0u64; 3];
        for i in chunk_range(c, n) {
            let mut rng = realization_rng(seed, i);
            let i_d = annulus_interference(cfg, r0, InterferenceKind::Direct, &mut rng);
            let i_r = annulus_interference(cfg, r0, ris_kind, &mut rng);
            let e: [f64; 3] = [Exp1.sample(&mut rng), Exp1.sample(&mut rng), Exp1.sample(&mut rng)];
            t[0] += (s_direct * e[0] > cfg.tau * i_d) as u64;
            t[1] += (s_ris * e[1] > cfg.tau * (i_d + i_r)) as u64;
            t[2] += (s_comp * e[2] > cfg.tau * (i_d + i_r)) as u64;
        }
        t
    });
    let mut total = [0u64; 3];
    for t in &tallies {
        for k in 0..3 {
            total[k] += t[k];
        }
    }
    Ok(ConditionalCoverage {
        direct: McEstimate::from_count(total[0], n, seed),
        ris: McEstimate::from_count(total[1], n, seed),
        composite: McEstimate::from_count(total[2], n, seed),
    })
}

/// Serving-signal powers `(S_R, S_C)` from explicitly sampled channels for a
/// serving AP at 2D distances `r0` (UE) and `z0` (RIS).
pub fn sample_signal_powers(
    cfg: &NetworkConfig,
    r0: f64,
    z0: f64,
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<f64>, Vec<f64>), McError> {
    Mode::FullChannel.check(cfg)?;
    if n == 0 {
        return Err(McError::NoRealizations);
    }
    let ne = cfg.n_elements.round() as usize;
    let f = &cfg.precoder_mags;
    let pl_d = pathloss_direct(cfg, r0);
    let pl_r = pathloss_ris(cfg, z0);
    let parts = exec.map(chunks(n), |c| {
        chunk_range(c, n)
            .map(|i| {
                let mut rng = realization_rng(seed, i);
                let w = ris_weights(ne, &mut rng);
                let a_r = ris_coefficient(&w, f, &mut rng);
                let a_d = direct_coefficient(f, &mut rng);
                let s_r = cfg.p_a * pl_r * a_r.norm_sq();
                let s_c = cfg.p_a * a_d.scale(pl_d.sqrt()).add(a_r.scale(pl_r.sqrt())).norm_sq();
                (s_r, s_c)
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().unzip())
}

/// One-sample Kolmogorov–Smirnov test against an exponential law whose rate
/// is fitted by maximum likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub fitted_rate: f64,
    pub statistic: f64,
    pub critical_value: f64,
    pub n: usize,
    pub pass: bool,
}

/// Asymptotic two-sided KS critical value `c(α)/√n` for α = 0.01.
pub const KS_C_ALPHA_001: f64 = 1.627_6;

pub fn ks_exponential(samples: &[f64]) -> KsResult {
    let n = samples.len();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let rate = 1.0 / mean;
    let nf = n as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = -(-rate * x).exp_m1();
            (cdf - i as f64 / nf).abs().max(((i + 1) as f64 / nf - cdf).abs())
        })
        .fold(0.0, f64::max);
    let critical_value = KS_C_ALPHA_001 / nf.sqrt();
    KsResult {
        fitted_rate: rate,
        statistic,
        critical_value,
        n,
        pass: statistic <= critical_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_config;

    #[test]
    fn realization_is_deterministic() {
        let cfg = reference_config();
        let a = sample_realization(&cfg, &mut realization_rng(7, 3));
        let b = sample_realization(&cfg, &mut realization_rng(7, 3));
        assert_eq!(a, b);
        let c = sample_realization(&cfg, &mut realization_rng(7, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn mean_ap_count_matches_intensity() {
        let cfg = reference_config();
        let n = 10_000u64;
        let total: usize = (0..n)
            .map(|i| sample_realization(&cfg, &mut realization_rng(11, i)).ap_positions.len())
            .sum();
        let mean = total as f64 / n as f64;
        let sigma = (440.0 / n as f64).sqrt();
        assert!((mean - 440.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn aps_inside_disk_and_nearest_served() {
        let cfg = reference_config().with("ue_offset", 5.0).unwrap();
        let real = sample_realization(&cfg, &mut realization_rng(1, 0));
        assert!(real.ap_positions.iter().all(|p| p[0].hypot(p[1]) <= cfg.radius));
        let s = real.serving.unwrap();
        assert!(real.dist_ue.iter().all(|&d| d >= real.dist_ue[s]));
        assert!((dist(real.ue, real.ris) - cfg.v0).abs() < 1e-12);
    }

    #[test]
    fn no_blockages_means_all_links_up() {
        let cfg = reference_config().with("lambda_b", 0.0).unwrap().with("h_r", 1.2).unwrap();
        let real = sample_realization(&cfg, &mut realization_rng(2, 0));
        assert!(real.direct_los.iter().all(|&b| b));
        assert!(real.ap_ris_los.iter().all(|&b| b));
        assert!(real.ris_ue_los);
        assert_eq!(classify(&cfg, &real), Association::Composite);
    }

    #[test]
    fn single_ap_has_infinite_sir() {
        let cfg = reference_config().with("lambda_a", 1e-9).unwrap().with("lambda_b", 0.0).unwrap();
        let mut real = sample_realization(&cfg, &mut realization_rng(0, 0));
        real.ap_positions = vec![[1.0, 0.0]];
        real.dist_ue = vec![1.0];
        real.dist_ris = vec![dist([1.0, 0.0], real.ris)];
        real.direct_los = vec![true];
        real.ap_ris_los = vec![true];
        real.direct_fading = vec![1.0];
        real.ris_fading = vec![1.0];
        real.serving = Some(0);
        real.signal_fading = 1.0;
        let sir = sir_sample(&cfg, &real, Mode::Distribution, &mut realization_rng(0, 1)).unwrap();
        assert_eq!(sir, f64::INFINITY);
    }

    #[test]
    fn classify_cases() {
        let cfg = reference_config();
        let mut real = sample_realization(&cfg, &mut realization_rng(3, 0));
        let s = real.serving.unwrap();
        for (d, r, want) in [
            (true, true, Association::Composite),
            (true, false, Association::Direct),
            (false, true, Association::Ris),
            (false, false, Association::None),
        ] {
            real.direct_los[s] = d;
            real.ris_ue_los = r;
            assert_eq!(classify(&cfg, &real), want);
        }
        real.direct_los[s] = false;
        real.ris_ue_los = true;
        real.ap_ris_los[s] = false;
        assert_eq!(classify(&cfg, &real), Association::None);
    }

    #[test]
    fn full_channel_guard() {
        let cfg = reference_config();
        assert!(matches!(
            estimate(&cfg, 10, Mode::FullChannel, 0, Exec::Serial),
            Err(McError::ModeUnavailable { .. })
        ));
        assert!(matches!(
            estimate(&cfg, 0, Mode::Distribution, 0, Exec::Serial),
            Err(McError::NoRealizations)
        ));
    }

    #[test]
    fn estimate_is_worker_independent() {
        let cfg = reference_config();
        let a = estimate(&cfg, 5000, Mode::Distribution, 9, Exec::Serial).unwrap();
        let b = estimate(&cfg, 5000, Mode::Distribution, 9, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let sum = a.association.direct.value + a.association.ris.value + a.association.composite.value + a.association.none.value;
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_threshold_covers_every_served_ue() {
        let cfg = reference_config().with("tau", 1e-300).unwrap();
        let r = estimate(&cfg, 4000, Mode::Distribution, 5, Exec::Parallel).unwrap();
        let served = 1.0 - r.association.none.value;
        assert!((r.coverage.value - served).abs() < 1e-12);
    }

    #[test]
    fn ks_accepts_exponential_and_rejects_uniform() {
        let mut rng = realization_rng(42, 0);
        let xs: Vec<f64> = (0..3000).map(|_| Exp1.sample(&mut rng)).map(|x: f64| x / 3.0).collect();
        let r = ks_exponential(&xs);
        assert!(r.pass);
        assert!((r.fitted_rate - 3.0).abs() < 0.2);
        let us: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        assert!(!ks_exponential(&us).pass);
    }
}

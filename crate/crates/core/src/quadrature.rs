//! Globally adaptive Gauss–Kronrod (10/21-point) integration and log-domain
//! helpers.
//!
//! The 1D integrator keeps a list of segments, always bisects the one with the
//! largest error estimate, and stops as soon as the summed estimate drops below
//! the absolute tolerance. The bisection sequence depends only on the integrand
//! and the initial breakpoints, never on the tolerance or on the worker count,
//! so a tighter tolerance continues the same sequence further.

#![allow(clippy::excessive_precision)]

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;

/// Default evaluation budget per integration call.
pub const DEFAULT_MAX_EVALS: u64 = 1_000_000;

/// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_965_330_310,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const NODES_PER_RULE: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
    pub converged: bool,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QuadError {
    #[error(
        "quadrature did not converge: error estimate {error_estimate:e} > tolerance {tolerance:e} \
         after {evaluations} evaluations (value {value:e})"
    )]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        tolerance: f64,
        evaluations: u64,
    },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration range [{a}, {b}]")]
    InvalidRange { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub tol_abs: f64,
    pub max_evals: u64,
    pub exec: Exec,
}

impl QuadOptions {
    pub fn new(tol_abs: f64) -> Self {
        Self {
            tol_abs,
            max_evals: DEFAULT_MAX_EVALS,
            exec: Exec::Serial,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_max_evals(mut self, max_evals: u64) -> Self {
        self.max_evals = max_evals;
        self
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rule_nodes(a: f64, b: f64, out: &mut Vec<f64>) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    out.push(center);
    for &x in &XGK[..10] {
        out.push(center - half * x);
        out.push(center + half * x);
    }
}

/// Applies the 21-point rule given function values laid out as by
/// [`rule_nodes`].
fn apply_rule(a: f64, b: f64, fv: &[f64]) -> Segment {
    let half = 0.5 * (b - a);
    let f_center = fv[0];
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    for j in 0..10 {
        let lo = fv[1 + 2 * j];
        let hi = fv[2 + 2 * j];
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv[1 + 2 * j] - mean).abs() + (fv[2 + 2 * j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();

    // QUADPACK-style rescaling of |K - G|.
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

/// Evaluates the rule on every `(a, b)` in `ranges` as one batch.
fn eval_segments<F, E>(f: &F, ranges: &[(f64, f64)], exec: Exec) -> Result<Vec<Segment>, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: From<QuadError> + Send,
{
    let mut xs = Vec::with_capacity(ranges.len() * NODES_PER_RULE);
    for &(a, b) in ranges {
        rule_nodes(a, b, &mut xs);
    }
    let raw = exec.map(xs.len(), |i| f(xs[i]));
    let mut fv = Vec::with_capacity(raw.len());
    for (x, r) in xs.iter().zip(raw) {
        let y = r?;
        if !y.is_finite() {
            return Err(QuadError::NonFinite { x: *x }.into());
        }
        fv.push(y);
    }
    Ok(ranges
        .iter()
        .zip(fv.chunks_exact(NODES_PER_RULE))
        .map(|(&(a, b), chunk)| apply_rule(a, b, chunk))
        .collect())
}

fn totals(segments: &[Segment]) -> (f64, f64) {
    segments
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Adaptive integral of a fallible integrand over the breakpoints `points`
/// (which must be non-decreasing; at least two entries).
pub fn integrate_1d_with<F, E>(f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: From<QuadError> + Send,
{
    let (Some(&a), Some(&b)) = (points.first(), points.last()) else {
        return Err(QuadError::InvalidRange { a: f64::NAN, b: f64::NAN }.into());
    };
    if points.len() < 2
        || !points.iter().all(|p| p.is_finite())
        || points.windows(2).any(|w| w[1] < w[0])
    {
        return Err(QuadError::InvalidRange { a, b }.into());
    }
    let ranges: Vec<(f64, f64)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    if ranges.is_empty() {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        });
    }

    let mut segments = eval_segments(&f, &ranges, opts.exec)?;
    let mut evaluations = (ranges.len() * NODES_PER_RULE) as u64;
    loop {
        let (value, error) = totals(&segments);
        if error <= opts.tol_abs {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                evaluations,
                converged: true,
            });
        }
        let fail = || QuadError::NonConvergence {
            value,
            error_estimate: error,
            tolerance: opts.tol_abs,
            evaluations,
        };
        if evaluations + 2 * NODES_PER_RULE as u64 > opts.max_evals {
            return Err(fail().into());
        }
        // Largest error first; ties resolve to the lowest index.
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, be), (i, s)| {
                if s.error > be {
                    (i, s.error)
                } else {
                    (bi, be)
                }
            });
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(fail().into());
        }
        let halves = eval_segments(&f, &[(seg.a, mid), (mid, seg.b)], opts.exec)?;
        evaluations += 2 * NODES_PER_RULE as u64;
        segments[worst] = halves[0];
        segments.push(halves[1]);
    }
}

/// Adaptive integral of `f` over `[a, b]` with absolute tolerance `tol_abs`.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, tol_abs: f64) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> f64 + Sync,
{
    if b < a {
        return Err(QuadError::InvalidRange { a, b });
    }
    integrate_1d_with(|x| Ok::<_, QuadError>(f(x)), &[a, b], &QuadOptions::new(tol_abs))
}

/// Axis-aligned integration rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }
}

/// Nested adaptive integral over a rectangle: the outer integral runs over x
/// (breakpoints `x_points`, first/last must equal `rect.x0`/`rect.x1`) and
/// each outer node integrates over y serially with breakpoints `y_points`.
///
/// Half the tolerance goes to the outer integral; the inner tolerance is the
/// other half divided by the x-width. The evaluation budget applies to each
/// inner integral and to the inner total, which is checked once at the end so
/// the outcome does not depend on scheduling.
pub fn integrate_2d_with<F, E>(
    f: F,
    x_points: &[f64],
    y_points: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult, E>
where
    F: Fn(f64, f64) -> Result<f64, E> + Sync,
    E: From<QuadError> + Send,
{
    let (Some(&x0), Some(&x1)) = (x_points.first(), x_points.last()) else {
        return Err(QuadError::InvalidRange { a: f64::NAN, b: f64::NAN }.into());
    };
    let width = x1 - x0;
    if width <= 0.0 {
        return integrate_1d_with(|_| Ok::<f64, E>(0.0), &[x0, x1], opts);
    }
    let inner_tol = 0.5 * opts.tol_abs / width;
    let inner_evals = AtomicU64::new(0);
    let inner_err_max = AtomicU64::new(0f64.to_bits());
    let outer_opts = QuadOptions {
        tol_abs: 0.5 * opts.tol_abs,
        max_evals: opts.max_evals,
        exec: opts.exec,
    };
    let outer = integrate_1d_with(
        |x| {
            let inner_opts = QuadOptions {
                tol_abs: inner_tol,
                max_evals: opts.max_evals,
                exec: Exec::Serial,
            };
            let r = integrate_1d_with(|y| f(x, y), y_points, &inner_opts)?;
            inner_evals.fetch_add(r.evaluations, Ordering::Relaxed);
            // Non-negative f64 bit patterns order like the values.
            inner_err_max.fetch_max(r.error_estimate.to_bits(), Ordering::Relaxed);
            Ok::<f64, E>(r.value)
        },
        x_points,
        &outer_opts,
    )?;
    let inner_err = f64::from_bits(inner_err_max.load(Ordering::Relaxed));
    let error_estimate = outer.error_estimate + width * inner_err;
    let evaluations = inner_evals.load(Ordering::Relaxed);
    if error_estimate > opts.tol_abs || evaluations > opts.max_evals {
        return Err(QuadError::NonConvergence {
            value: outer.value,
            error_estimate,
            tolerance: opts.tol_abs,
            evaluations,
        }
        .into());
    }
    Ok(QuadResult {
        value: outer.value,
        error_estimate,
        evaluations,
        converged: true,
    })
}

/// Nested adaptive integral of `f` over `rect`.
pub fn integrate_2d<F>(f: F, rect: Rect, tol_abs: f64) -> Result<QuadResult, QuadError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if rect.x1 < rect.x0 || rect.y1 < rect.y0 {
        return Err(QuadError::InvalidRange { a: rect.x0, b: rect.x1 });
    }
    integrate_2d_with(
        |x, y| Ok::<_, QuadError>(f(x, y)),
        &[rect.x0, rect.x1],
        &[rect.y0, rect.y1],
        &QuadOptions::new(tol_abs),
    )
}

/// `ln(Σ exp(x_i))`, stable for widely spread exponents. Empty input gives −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(Π x_i)` for positive factors given as logs.
pub fn log_product(ln_factors: &[f64]) -> f64 {
    ln_factors.iter().sum()
}

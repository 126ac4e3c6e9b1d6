//! Adaptive Gauss–Kronrod quadrature on finite and infinite intervals.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule is applied
//! adaptively: the segment with the largest error estimate is bisected until
//! the summed error estimate drops below the requested absolute tolerance.
//! Infinite ranges are mapped onto `(0, 1]` with the rational substitution
//! `x = (1 - t) / t`, which keeps polynomially decaying tails (Student-t
//! kernels) integrable to full precision. The tanh map was tried first and
//! cannot reach 1e-10 absolute error on heavy tails in f64, because
//! `atanh(t)` saturates near 19 before `1 - t` underflows.

use crate::error::{Error, Result};

/// Abscissae of the 15-point Kronrod rule on `[-1, 1]` (positive half).
/// Entries at even indices are the added Kronrod points; odd indices hold the
/// embedded 7-point Gauss abscissae.
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.000_000_000_000_000_000_0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];

const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Summed per-segment error estimate (absolute).
    pub error_estimate: f64,
    /// Number of segments in the final partition.
    pub segments: usize,
}

/// Integration range.
#[derive(Debug, Clone, Copy)]
pub enum Range {
    Finite(f64, f64),
    /// `[a, +inf)`
    UpperInfinite(f64),
    /// `(-inf, b]`
    LowerInfinite(f64),
    /// `(-inf, +inf)`
    FullLine,
}

/// One Kronrod-15 application on `[a, b]`; returns the integral estimate and
/// an error estimate from the Gauss/Kronrod discrepancy.
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);

    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, &node) in KRONROD_NODES.iter().enumerate() {
        let (lo, hi) = (center - half * node, center + half * node);
        let pair = if node == 0.0 { f(lo) } else { f(lo) + f(hi) };
        if !pair.is_finite() {
            return Err(Error::Quadrature(format!(
                "integrand not finite at x = {lo} or x = {hi}"
            )));
        }
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    kronrod *= half;
    gauss *= half;

    // QUADPACK-style sharpened error estimate.
    let diff = (kronrod - gauss).abs();
    let err = if diff == 0.0 {
        0.0
    } else {
        diff * (200.0 * diff).sqrt().min(1.0).max(diff / kronrod.abs().max(1e-300))
    };
    Ok((kronrod, err.max(diff * 1e-2)))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptively integrate `f` on a finite interval, starting from
/// `initial_splits` equal segments, until the summed error estimate is below
/// `abs_tol` or `max_segments` is reached.
pub fn integrate_finite_with<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_splits: usize,
    max_segments: usize,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(format!("bad integration interval [{a}, {b}]")));
    }
    let splits = initial_splits.max(1);
    let mut segments = Vec::with_capacity(splits);
    for i in 0..splits {
        let lo = a + (b - a) * i as f64 / splits as f64;
        let hi = a + (b - a) * (i + 1) as f64 / splits as f64;
        let (value, error) = kronrod15(f, lo, hi)?;
        segments.push(Segment { a: lo, b: hi, value, error });
    }

    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= abs_tol {
            break;
        }
        if segments.len() >= max_segments {
            return Err(Error::Quadrature(format!(
                "error estimate {total_error:.3e} above tolerance {abs_tol:.3e} \
                 after {} segments on [{a}, {b}]",
                segments.len()
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("nonempty segment list");
        let Segment { a: lo, b: hi, .. } = segments[worst];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval at floating-point resolution; accept what we have.
            break;
        }
        let (v1, e1) = kronrod15(f, lo, mid)?;
        let (v2, e2) = kronrod15(f, mid, hi)?;
        segments[worst] = Segment { a: lo, b: mid, value: v1, error: e1 };
        segments.push(Segment { a: mid, b: hi, value: v2, error: e2 });
    }

    Ok(QuadResult {
        value: segments.iter().map(|s| s.value).sum(),
        error_estimate: segments.iter().map(|s| s.error).sum(),
        segments: segments.len(),
    })
}

/// Adaptive integration over `range` to absolute tolerance `abs_tol`.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: &F,
    range: Range,
    abs_tol: f64,
    initial_splits: usize,
    max_segments: usize,
) -> Result<QuadResult> {
    match range {
        Range::Finite(a, b) => integrate_finite_with(f, a, b, abs_tol, initial_splits, max_segments),
        Range::UpperInfinite(a) => {
            let g = move |t: f64| {
                let x = a + (1.0 - t) / t;
                let fx = f(x);
                if fx == 0.0 { 0.0 } else { fx / (t * t) }
            };
            integrate_finite_with(&g, f64::MIN_POSITIVE, 1.0, abs_tol, initial_splits, max_segments)
        }
        Range::LowerInfinite(b) => {
            let g = move |t: f64| {
                let x = b - (1.0 - t) / t;
                let fx = f(x);
                if fx == 0.0 { 0.0 } else { fx / (t * t) }
            };
            integrate_finite_with(&g, f64::MIN_POSITIVE, 1.0, abs_tol, initial_splits, max_segments)
        }
        Range::FullLine => {
            let g = move |t: f64| {
                let x = (1.0 - t) / t;
                let (fp, fm) = (f(x), f(-x));
                let sum = fp + fm;
                if sum == 0.0 { 0.0 } else { sum / (t * t) }
            };
            integrate_finite_with(&g, f64::MIN_POSITIVE, 1.0, abs_tol, initial_splits, max_segments)
        }
    }
}

/// Integrate with default refinement controls (tolerance-driven subdivision,
/// up to 4096 segments).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, range: Range, abs_tol: f64) -> Result<QuadResult> {
    integrate_with(f, range, abs_tol, 8, 4096)
}

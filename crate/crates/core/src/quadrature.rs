//! Adaptive Gauss–Kronrod (7/15) quadrature on finite and half-infinite ranges.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("quadrature did not converge: achieved error bound {achieved:e}, requested {requested:e}")]
pub struct QuadratureError {
    pub achieved: f64,
    pub requested: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(centre - half * x);
        let f2 = f(centre + half * x);
        kronrod += w * (f1 + f2);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to absolute error `tol`.
///
/// Returns the estimate and the summed Kronrod error bound.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64), QuadratureError> {
    if b <= a {
        return Ok((0.0, 0.0));
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total_err = e;
    while total_err > tol {
        if pieces.len() >= MAX_INTERVALS {
            return Err(QuadratureError { achieved: total_err, requested: tol });
        }
        // Bisect the piece with the largest error.
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, err) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval can no longer be split in floating point.
            return Err(QuadratureError { achieved: total_err, requested: tol });
        }
        let (vl, el) = kronrod15(&f, lo, mid);
        let (vr, er) = kronrod15(&f, mid, hi);
        total_err += el + er - err;
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
    let value = pieces.iter().map(|p| p.2).sum();
    Ok((value, total_err.max(0.0)))
}

/// Integrates a non-negative `f` over `[a, inf)`, assuming `f` is unimodal with
/// its mode at or before `peak` and decays beyond it.
///
/// The range is cut at `peak` and then covered by geometrically growing
/// panels starting at width `scale` until a panel contributes nothing
/// measurable.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    peak: f64,
    scale: f64,
    tol: f64,
) -> Result<(f64, f64), QuadratureError> {
    let peak = peak.max(a);
    let mut budget = tol / 4.0;
    let (mut value, mut err) = integrate(&f, a, peak, budget)?;
    let mut lo = peak;
    let mut width = scale.max(f64::MIN_POSITIVE);
    for _ in 0..400 {
        budget = (budget * 0.5).max(tol * 1e-6);
        let hi = lo + width;
        let (v, e) = integrate(&f, lo, hi, budget)?;
        value += v;
        err += e;
        if v.abs() <= tol * 1e-6 && f(hi).abs() * width <= tol * 1e-6 {
            return Ok((value, err));
        }
        lo = hi;
        width *= 2.0;
    }
    Err(QuadratureError { achieved: f64::INFINITY, requested: tol })
}

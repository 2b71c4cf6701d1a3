//! Adaptive Gauss-Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

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
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

/// Integrates several functions at once on `[a, b]`; returns the
/// Kronrod estimates and the largest Kronrod-Gauss difference.
fn gk15<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let fc = f(center);
    for k in 0..K {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for k in 0..K {
        kron[k] *= half;
        gauss[k] *= half;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    (kron, err)
}

fn adapt<const K: usize>(
    f: &impl Fn(f64) -> [f64; K],
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    acc: &mut [f64; K],
) -> Result<()> {
    let (est, err) = gk15(f, a, b);
    let scale = est.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if err <= tol.max(50.0 * f64::EPSILON * scale) || (b - a).abs() < 1e-14 * (a.abs() + b.abs()).max(1e-300) {
        for k in 0..K {
            acc[k] += est[k];
        }
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] (error estimate {err:e})"
        )));
    }
    let mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth + 1, acc)?;
    adapt(f, mid, b, 0.5 * tol, depth + 1, acc)
}

/// Integrates the vector-valued `f` over consecutive panels of `breaks`
/// (which must be increasing) to an absolute tolerance `tol` in total.
pub fn integrate_panels<const K: usize>(
    f: impl Fn(f64) -> [f64; K],
    breaks: &[f64],
    tol: f64,
) -> Result<[f64; K]> {
    let total = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let mut acc = [0.0; K];
    if total <= 0.0 {
        return Ok(acc);
    }
    for w in breaks.windows(2) {
        let share = (tol * (w[1] - w[0]) / total).max(1e-17);
        adapt(&f, w[0], w[1], share, 0, &mut acc)?;
    }
    Ok(acc)
}

/// Scalar convenience wrapper on a single interval.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(integrate_panels(|x| [f(x)], &[a, b], tol)?[0])
}

/// Bisection for an increasing `g` with `g(lo) <= target <= g(hi)`.
pub fn bisect_increasing(
    g: impl Fn(f64) -> Result<f64>,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

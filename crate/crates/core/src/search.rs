//! One-dimensional peak location for spectra.

use crate::error::{Error, Result};

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub value: f64,
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Peak {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    Peak { x, value: f(x) }
}

/// Global maximum on `[lo, hi]`: a uniform scan of `samples` points, then
/// golden-section refinement inside the bracketing cells.
pub fn locate_max<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    samples: usize,
    tol: f64,
) -> Result<Peak> {
    if samples < 3 || !(hi > lo) {
        return Err(Error::InvalidParameter(
            "peak search needs lo < hi and at least 3 samples".into(),
        ));
    }
    let h = (hi - lo) / (samples - 1) as f64;
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..samples {
        let v = f(lo + i as f64 * h);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    if !best_v.is_finite() {
        return Err(Error::InvalidParameter(
            "objective is not finite on the search interval".into(),
        ));
    }
    let a = lo + best.saturating_sub(1) as f64 * h;
    let b = (lo + (best + 1) as f64 * h).min(hi);
    let p = golden_max(&mut f, a, b, tol);
    Ok(if p.value >= best_v {
        p
    } else {
        Peak {
            x: lo + best as f64 * h,
            value: best_v,
        }
    })
}

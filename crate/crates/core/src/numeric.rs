//! Small numerical helpers shared by the constant and renewal computations.

use crate::{Error, Result};

pub use statrs::function::gamma::digamma;

/// Trigamma function `psi'(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic series in 1/x with Bernoulli-number coefficients.
    acc + inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * 5.0 / 66.0))))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

const MAX_DEPTH: u32 = 48;
const INITIAL_PANELS: usize = 8;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Fails if the integrand produces a non-finite value anywhere it is sampled.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Numerical(format!("integrand is {y} at x = {x}")))
        }
    };
    // Start from a few panels so a bump between coarse nodes is not missed.
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut lo = a;
    let mut f_lo = eval(a)?;
    for i in 1..=INITIAL_PANELS {
        let hi = if i == INITIAL_PANELS { b } else { a + width * i as f64 };
        let f_hi = eval(hi)?;
        let m = 0.5 * (lo + hi);
        let fm = eval(m)?;
        let whole = (hi - lo) / 6.0 * (f_lo + 4.0 * fm + f_hi);
        total += simpson_step(&eval, lo, hi, f_lo, fm, f_hi, whole, tol / INITIAL_PANELS as f64, MAX_DEPTH)?;
        lo = hi;
        f_lo = f_hi;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Integral of `f` over `(0, 1)` with the interval split geometrically towards
/// both endpoints, which keeps integrable endpoint singularities (Beta densities
/// with parameters below one, `ln` factors) from stalling the bisection.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    let mut breaks = Vec::with_capacity(64);
    let mut x = 0.5_f64;
    while x > 1e-300 {
        breaks.push(x);
        x *= 1.0 / 64.0;
    }
    breaks.push(0.0);
    breaks.reverse();
    let mut y = 0.5_f64;
    while y > 1e-15 {
        y *= 1.0 / 64.0;
        breaks.push(1.0 - y);
    }
    breaks.push(1.0);
    let pieces = (breaks.len() - 1) as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        // endpoints themselves may be singular, so pull them in by one ulp
        let lo = if w[0] == 0.0 { f64::MIN_POSITIVE } else { w[0] };
        let hi = if w[1] == 1.0 { 1.0 - f64::EPSILON / 2.0 } else { w[1] };
        if hi > lo {
            total += integrate(&f, lo, hi, tol / pieces)?;
        }
    }
    Ok(total)
}

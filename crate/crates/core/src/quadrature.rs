//! Double-exponential quadrature.
//!
//! Every kernel in this crate has an integrable algebraic singularity at the
//! origin (`x^{-beta}` or `x^{-1-beta}` against a vanishing factor) and, on
//! half-lines, either exponential or algebraic decay. Tanh-sinh on finite
//! intervals and exp-sinh on `[a, inf)` handle both without knowing the
//! singular exponent. Refinement halves the step until two successive levels
//! agree.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const MAX_LEVEL: usize = 10;
const T_MAX: f64 = 6.5;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn met(&self, err: f64, value: f64) -> bool {
        err <= self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-14, 1e-12)
    }
}

/// `∫_a^b f(x) dx` by tanh-sinh. Nodes never touch the endpoints, and points
/// next to `a` are formed as `a + d` with `d` computed directly, so a
/// singularity at `a = 0` is resolved down to subnormal distances.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("tanh_sinh bounds"));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return tanh_sinh(f, b, a, tol).map(|v| -v);
    }
    let half = 0.5 * (b - a);
    let mid = a + half;

    // Contribution of the node pair at abscissa t > 0 (both sides), or the
    // center node at t = 0.
    let pair = |t: f64| -> f64 {
        if t == 0.0 {
            return half * FRAC_PI_2 * f(mid);
        }
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        let dist = 2.0 * half * e / (1.0 + e);
        let weight = half * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if dist == 0.0 || weight == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        let xl = a + dist;
        if xl > a {
            s += weight * f(xl);
        }
        let xr = b - dist;
        if xr < b {
            s += weight * f(xr);
        }
        s
    };

    refine(pair, T_MAX, true, tol)
}

/// `∫_a^∞ f(x) dx` by exp-sinh, `x = a + exp(π/2 sinh t)`.
pub fn exp_sinh<F>(f: F, a: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !a.is_finite() {
        return Err(Error::NonFinite("exp_sinh lower bound"));
    }
    let node = |t: f64| -> f64 {
        let e = (FRAC_PI_2 * t.sinh()).exp();
        if e == 0.0 || !e.is_finite() {
            return 0.0;
        }
        let x = a + e;
        if x == a {
            return 0.0;
        }
        let weight = FRAC_PI_2 * t.cosh() * e;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            weight * v
        }
    };
    // t_max keeps exp(π/2 sinh t) below f64 overflow.
    refine(node, 6.7, false, tol)
}

/// Splits `[a, b]` at the given interior breakpoints and sums tanh-sinh
/// integrals over the pieces.
pub fn tanh_sinh_split<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut lo = a;
    let mut total = 0.0;
    for p in pts.into_iter().chain(std::iter::once(b)) {
        total += tanh_sinh(&f, lo, p, tol)?;
        lo = p;
    }
    Ok(total)
}

/// Level-by-level trapezoidal refinement in the transformed variable.
///
/// `symmetric` means `term(t)` already contains both the `+t` and `-t` nodes
/// and `term(0)` is the center; otherwise `term` is evaluated on both signs.
fn refine<T>(term: T, t_max: f64, symmetric: bool, tol: Tolerance) -> Result<f64>
where
    T: Fn(f64) -> f64,
{
    let mut h = 0.5;
    let eval = |t: f64| -> f64 {
        if symmetric || t == 0.0 {
            term(t)
        } else {
            term(t) + term(-t)
        }
    };

    let n0 = (t_max / h).floor() as usize;
    let mut sum: f64 = (0..=n0).map(|k| eval(k as f64 * h)).sum();
    let mut estimate = h * sum;
    let mut last_err = f64::INFINITY;

    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let n = (t_max / h).floor() as usize;
        let fresh: f64 = (1..=n).step_by(2).map(|k| eval(k as f64 * h)).sum();
        sum += fresh;
        let next = h * sum;
        if !next.is_finite() {
            return Err(Error::NonFinite("quadrature sum"));
        }
        last_err = (next - estimate).abs();
        estimate = next;
        if tol.met(last_err, estimate) {
            return Ok(estimate);
        }
    }
    Err(Error::Quadrature {
        estimate,
        error: last_err,
    })
}

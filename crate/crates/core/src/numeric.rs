//! Scalar root finding and summation helpers shared by the solvers.

use crate::error::{Error, Result};

/// Neumaier-compensated sum; the result does not depend on summation order
/// beyond the last couple of ulps.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Result of a bracketed bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Midpoints are geometric while the bracket spans more than a factor of four
/// (and `lo > 0`), arithmetic otherwise. Iteration stops as soon as
/// `accept(x, f(x))` holds or the bracket can no longer be split in floating
/// point; the evaluated point with the smallest `|f|` is returned.
pub fn bisect<F, A>(mut f: F, mut lo: f64, mut hi: f64, accept: A) -> Result<Root>
where
    F: FnMut(f64) -> f64,
    A: Fn(f64, f64) -> bool,
{
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty bracket [{lo}, {hi}]")));
    }
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::solver("function is NaN at a bracket end"));
    }
    let mut best = if flo.abs() <= fhi.abs() {
        Root { x: lo, fx: flo, iterations: 0 }
    } else {
        Root { x: hi, fx: fhi, iterations: 0 }
    };
    if accept(best.x, best.fx) || flo == 0.0 || fhi == 0.0 {
        return Ok(best);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::solver(format!(
            "no sign change on [{lo:e}, {hi:e}]: f(lo)={flo:e}, f(hi)={fhi:e}"
        )));
    }
    let lo_sign = flo.signum();
    let mut iterations = 0;
    loop {
        let mid = if lo > 0.0 && hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            lo + 0.5 * (hi - lo)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::solver(format!("function is NaN at {mid:e}")));
        }
        if fm.abs() < best.fx.abs() || (fm.abs() == best.fx.abs() && fm == 0.0) {
            best = Root { x: mid, fx: fm, iterations };
        }
        if fm == 0.0 || accept(mid, fm) {
            best = Root { x: mid, fx: fm, iterations };
            break;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if iterations > 4000 {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

/// Grows `[lo, hi]` geometrically upward until `f` changes sign, never beyond `cap`.
pub fn grow_upper<F: FnMut(f64) -> f64>(mut f: F, lo: f64, mut hi: f64, cap: f64) -> Result<f64> {
    let s = f(lo).signum();
    while f(hi).signum() == s {
        if hi >= cap {
            return Err(Error::solver(format!("bracket growth exceeded cap {cap:e}")));
        }
        hi = (hi * 16.0).min(cap);
    }
    Ok(hi)
}

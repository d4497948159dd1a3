//! Scalar root bracketing.

use crate::{Error, Result};

/// Bisection on [a, b]. Requires a sign change (or a root at an endpoint);
/// returns the midpoint of the final bracket once its width is <= tol.
pub fn find_root_bisect(mut g: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::validation(format!("invalid bracket [{a}, {b}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::validation(format!("tolerance must be positive, got {tol}")));
    }
    let fa = g(a);
    let fb = g(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoBracket { a, b, fa, fb });
    }
    let (mut lo, mut hi) = (a, b);
    let mut flo = fa;
    // Width halves every pass, so the loop terminates once the bracket is
    // at tol or at the floating-point resolution of the endpoints.
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket no longer representable any tighter
        }
        let fm = g(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

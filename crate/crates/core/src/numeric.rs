//! Small numeric helpers shared by the root finders.

use crate::error::{Error, Result};

pub const BISECTION_MAX_ITER: usize = 200;

/// Bracketed bisection for a sign change of `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
/// Halves the bracket until its midpoint is no longer representable between
/// the ends, so the result is accurate to the last bit of `f`'s sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, what: &str) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::RootFinding(format!("{what}: non-finite value at bracket end")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFinding(format!("{what}: invalid bracket [{lo}, {hi}] (f = {fa}, {fb})")));
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Number of sign changes of `f` over `samples + 1` evenly spaced points,
/// ignoring exact zeros. Used to reject first-order conditions with several
/// roots.
pub fn sign_changes<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, samples: usize) -> usize {
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for k in 0..=samples {
        let x = lo + (hi - lo) * k as f64 / samples as f64;
        let v = f(x);
        if v == 0.0 || !v.is_finite() {
            continue;
        }
        let pos = v > 0.0;
        if let Some(prev) = last {
            if prev != pos {
                changes += 1;
            }
        }
        last = Some(pos);
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, "sqrt").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, "x"), Err(Error::RootFinding(_))));
    }

    #[test]
    fn counts_sign_changes() {
        assert_eq!(sign_changes(|x| (x - 0.3) * (x - 0.7), 0.0, 1.0, 100), 2);
        assert_eq!(sign_changes(|x| 1.0 - x, 0.0, 2.0, 10), 1);
    }
}

//! Bracketed bisection over fallible objective functions.
//!
//! Every root this crate locates sits on a proven-monotone stretch of its
//! objective, so bisection is guaranteed once a sign change is bracketed;
//! no superlinear method is worth the loss of that guarantee.

use crate::error::{Error, Result};

/// Locate a root of `f` on `[lo, hi]`, assuming `f(lo)` and `f(hi)` have
/// opposite signs. Runs until the interval width falls below
/// `tol * (1 + |mid|)`.
pub fn bisect(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = hi;
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketingFailure {
            target: "bisection".into(),
            detail: format!("no sign change on [{lo}, {hi}]: f(lo)={f_lo:.6e}, f(hi)={f_hi:.6e}"),
        });
    }
    let sign_lo = f_lo.signum();
    // 200 halvings exhausts f64 resolution on any bracket
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * (1.0 + mid.abs()) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_root() {
        let root = bisect(&|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((root - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_same_sign_bracket() {
        assert!(matches!(
            bisect(&|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12),
            Err(Error::BracketingFailure { .. })
        ));
    }

    #[test]
    fn propagates_evaluation_errors() {
        let res = bisect(
            &|x| {
                if x > 0.5 {
                    Err(Error::NonPositiveRate(x))
                } else {
                    Ok(x - 0.25)
                }
            },
            0.0,
            1.0,
            1e-12,
        );
        assert!(res.is_err());
    }
}

//! Bracketing root refinement.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Refines a sign-changing bracket `[lo, hi]` of `f` until its width is at
/// most `rel_tol * |x|`.
///
/// Each step tries a regula-falsi point with the Illinois down-weighting of
/// a stale endpoint, and falls back to bisection whenever the secant step
/// shrinks the bracket by less than half. Errors from `f` are propagated.
pub fn refine_bracket<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numeric(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
        )));
    }
    // Which endpoint was retained on the previous step (for Illinois).
    let mut kept: i8 = 0;
    for _ in 0..MAX_ITER {
        let width = hi - lo;
        let scale = lo.abs().max(hi.abs());
        if width.abs() <= rel_tol * scale {
            break;
        }
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        let inside = secant > lo.min(hi) && secant < lo.max(hi);
        let x = if inside { secant } else { mid };
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if kept == 1 {
                f_hi *= 0.5;
            }
            kept = 1;
        } else {
            hi = x;
            f_hi = fx;
            if kept == -1 {
                f_lo *= 0.5;
            }
            kept = -1;
        }
        // Guarantee geometric shrinkage.
        if (hi - lo).abs() > 0.5 * width.abs() {
            let m = 0.5 * (lo + hi);
            let fm = f(m)?;
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == f_lo.signum() {
                lo = m;
                f_lo = fm;
            } else {
                hi = m;
                f_hi = fm;
            }
            kept = 0;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = refine_bracket(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn handles_flat_then_steep() {
        // Regula falsi alone stalls on this one.
        let r = refine_bracket(|x: f64| Ok(x.powi(9) - 1e-9), 0.0, 4.0, 1e-13).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_same_sign() {
        assert!(refine_bracket(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-10).is_err());
    }
}

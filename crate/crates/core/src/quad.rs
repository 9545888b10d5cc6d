//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7/15-point Gauss–Kronrod pair with global adaptive bisection: the
//! interval with the largest error estimate is split until the summed error
//! estimate drops below `max(abs, rel * |I|)`. The error estimate of a panel
//! is `|K15 - G7|`, which overstates the error of the Kronrod value for
//! smooth integrands.
//!
//! [`integrate_log`] integrates over `(0, inf)`-supported integrands after
//! the substitution `u = exp(s)`, which turns power-law endpoint behaviour
//! into something polynomial-friendly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

/// Requested accuracy: the result is accepted once the error estimate is
/// below `max(abs, rel * |estimate|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub const fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-11, 1e-14)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&node, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * node;
        let pair = f(center - dx) + f(center + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]` split initially into `pieces` panels.
/// Reversed limits give the negated integral.
pub fn integrate_pieces<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    pieces: usize,
    tol: Tolerance,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    if lo == hi {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "quadrature limits must be finite, got [{lo}, {hi}]"
        )));
    }
    if hi < lo {
        return integrate_pieces(f, hi, lo, pieces, tol).map(|e| Estimate {
            value: -e.value,
            ..e
        });
    }

    let pieces = pieces.max(1);
    let width = (hi - lo) / pieces as f64;
    let mut heap = BinaryHeap::with_capacity(2 * pieces + 16);
    let mut value = 0.0;
    let mut error = 0.0;
    for i in 0..pieces {
        let a = lo + width * i as f64;
        let b = if i + 1 == pieces { hi } else { a + width };
        let p = kronrod(&mut f, a, b);
        value += p.value;
        error += p.error;
        heap.push(p);
    }

    loop {
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel cannot be split further in double precision.
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            error -= worst.error;
            continue;
        }
        let left = kronrod(&mut f, worst.lo, mid);
        let right = kronrod(&mut f, mid, worst.hi);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed accumulated cancellation in the running totals.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    if error <= tol.abs.max(tol.rel * value.abs()) {
        return Ok(Estimate {
            value,
            error,
            intervals: heap.len(),
        });
    }
    Err(Error::Quadrature {
        lo,
        hi,
        estimate: value,
        error,
        intervals: heap.len(),
    })
}

/// Integrates `f` over `[lo, hi]`.
pub fn integrate<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_pieces(f, lo, hi, 1, tol).map(|e| e.value)
}

/// Integrates `f` over `[lo, hi]` with `0 < lo, hi` using `u = exp(s)`.
pub fn integrate_log<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo > 0.0 && hi > 0.0) {
        return Err(Error::Domain(format!(
            "log-substituted quadrature needs positive limits, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let (s0, s1) = (lo.ln(), hi.ln());
    // One initial panel per factor of two in u keeps the heap balanced.
    let pieces = ((s1 - s0).abs() / std::f64::consts::LN_2)
        .ceil()
        .clamp(1.0, 256.0) as usize;
    integrate_pieces(
        |s| {
            let u = s.exp();
            f(u) * u
        },
        s0,
        s1,
        pieces,
        tol,
    )
    .map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((v - 10.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_negate() {
        let tol = Tolerance::new(1e-13, 0.0);
        let a = integrate(f64::sin, 0.3, 2.0, tol).unwrap();
        let b = integrate(f64::sin, 2.0, 0.3, tol).unwrap();
        assert_eq!(a, -b);
        assert!((a - (0.3f64.cos() - 2.0f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn log_substitution_handles_endpoint_power() {
        // int_{1e-8}^{1} u^{-0.9} du = (1 - 1e-8^{0.1}) / 0.1
        let tol = Tolerance::new(1e-12, 0.0);
        let v = integrate_log(|u| u.powf(-0.9), 1e-8, 1.0, tol).unwrap();
        let exact = (1.0 - 1e-8f64.powf(0.1)) / 0.1;
        assert!((v / exact - 1.0).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(
            integrate(|x| x, 1.5, 1.5, Tolerance::default()).unwrap(),
            0.0
        );
        assert_eq!(
            integrate_log(|x| x, 1.5, 1.5, Tolerance::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn non_positive_log_limits_rejected() {
        assert!(integrate_log(|x| x, 0.0, 1.0, Tolerance::default()).is_err());
    }
}

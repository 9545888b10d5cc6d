//! Optimal threshold, gain and relative value function for the long-run
//! average criterion.
//!
//! For `λ > 0`, `α != 1` and `2 - α - γ != 0` the optimal policy notifies at
//! the threshold
//!
//! ```text
//! x̄ = [ (2-γ)(1-b^{2-α-γ}) / ((2-α-γ)(1-b^{2-γ}) λ) ]^{1/α}
//! ```
//!
//! and the long-run average reward equals the average of `c(x)` over one
//! saw-tooth cycle `[b x̄, x̄]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    reward_rate_unchecked, validate_alpha, CriterionParams, FlowParams, ThresholdPolicy,
};

/// Optimal threshold and gain for one flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSolution {
    pub x_bar: f64,
    pub g: f64,
    pub flow: FlowParams,
    pub criterion: CriterionParams,
}

impl AverageSolution {
    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            x_bar: self.x_bar,
            b: self.flow.b,
        }
    }
}

fn check_average_params(fp: &FlowParams, cp: &CriterionParams) -> Result<()> {
    fp.validate()?;
    validate_alpha(cp.alpha)?;
    if !(cp.lambda > 0.0) || !cp.lambda.is_finite() {
        return Err(Error::ZeroPrice(cp.lambda));
    }
    if (2.0 - cp.alpha - fp.gamma).abs() < 1e-12 {
        return Err(Error::DegenerateExponent {
            alpha: cp.alpha,
            gamma: fp.gamma,
        });
    }
    Ok(())
}

/// Closed-form optimal threshold `x̄` and gain `g`.
pub fn threshold_avg(fp: &FlowParams, cp: &CriterionParams) -> Result<AverageSolution> {
    check_average_params(fp, cp)?;
    let (b, g, alpha, lambda) = (fp.b, fp.gamma, cp.alpha, cp.lambda);
    let q = 2.0 - alpha - g;
    let base = (2.0 - g) * (1.0 - b.powf(q)) / (q * (1.0 - b.powf(2.0 - g)) * lambda);
    let x_bar = base.powf(1.0 / alpha);
    let lead = x_bar * lambda * alpha / (1.0 - alpha);
    let gain = if g == 1.0 {
        lead * (b - 1.0) / b.ln()
    } else {
        lead * (1.0 - g) * (1.0 - b.powf(2.0 - g)) / ((2.0 - g) * (1.0 - b.powf(1.0 - g)))
    };
    if !(x_bar.is_finite() && x_bar > 0.0 && gain.is_finite()) {
        return Err(Error::Numeric(format!(
            "threshold formula produced x̄ = {x_bar}, g = {gain}"
        )));
    }
    Ok(AverageSolution {
        x_bar,
        g: gain,
        flow: *fp,
        criterion: *cp,
    })
}

/// Relative value `h` of the average criterion.
///
/// Below the threshold `h = h₀` solves `c(x) - g + h'(x) a x^γ = 0`; above it
/// `h(x) = h₀(b^{v(x)} x)`. The gain entering the Bellman equation is kept
/// separately from the gain used to build `h₀` so a candidate triplet can be
/// perturbed without rebuilding `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeValueProfile {
    pub solution: AverageSolution,
    /// Gain used in the Bellman residual.
    pub bellman_gain: f64,
}

impl RelativeValueProfile {
    pub fn new(solution: AverageSolution) -> Self {
        Self {
            solution,
            bellman_gain: solution.g,
        }
    }

    /// Same `h`, different gain in the Bellman equation.
    pub fn with_bellman_gain(mut self, g: f64) -> Self {
        self.bellman_gain = g;
        self
    }

    /// Same `h₀`, impulse region starting at `x_bar` instead.
    pub fn with_threshold(mut self, x_bar: f64) -> Self {
        self.solution.x_bar = x_bar;
        self
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.solution.policy()
    }

    /// `h₀` for `γ < 1` as an explicit antiderivative; the `γ = 1` form is
    /// `(1/a)[g ln x + λ x - x^{1-α}/(1-α)²]`.
    pub fn h0(&self, x: f64) -> f64 {
        let s = &self.solution;
        let (a, g, alpha, lambda, gain) = (
            s.flow.a,
            s.flow.gamma,
            s.criterion.alpha,
            s.criterion.lambda,
            s.g,
        );
        if g == 1.0 {
            (gain * x.ln() + lambda * x - x.powf(1.0 - alpha) / ((1.0 - alpha) * (1.0 - alpha))) / a
        } else {
            let q = 2.0 - alpha - g;
            (-x.powf(q) / ((1.0 - alpha) * q)
                + lambda * x.powf(2.0 - g) / (2.0 - g)
                + gain * x.powf(1.0 - g) / (1.0 - g))
                / a
        }
    }

    /// `h₀'(x) = (g - c(x)) / (a x^γ)`.
    pub fn h0_prime(&self, x: f64) -> f64 {
        let s = &self.solution;
        let c = reward_rate_unchecked(x, s.criterion.alpha, s.criterion.lambda);
        (s.g - c) / (s.flow.a * x.powf(s.flow.gamma))
    }

    /// `h` on the branch `k`: `h₀(b^k x)`.
    pub fn branch_value(&self, x: f64, k: u32) -> f64 {
        self.h0(x * self.solution.flow.b.powi(k as i32))
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (y, _) = self.policy().land(x);
        Ok(self.h0(y))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (y, k) = self.policy().land(x);
        Ok(self.solution.flow.b.powi(k as i32) * self.h0_prime(y))
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "rate must be finite and > 0, got {x}"
        )))
    }
}

/// `h(x)` with the piecewise extension above the threshold.
pub fn relative_value(x: f64, profile: &RelativeValueProfile) -> Result<f64> {
    profile.value(x)
}

/// The two terms of a Bellman equation `max{flow, impulse} = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub flow: f64,
    pub impulse: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.flow.max(self.impulse)
    }
}

/// `sup_{m >= 1} [V(b^m x) - V(x)]`, truncated one term after the first
/// `b^m x < b x̄`: deeper impulses land further inside the region where `V`
/// is increasing.
pub(crate) fn impulse_sup<F>(x: f64, b: f64, x_bar: f64, mut value: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let here = value(x)?;
    let mut best = f64::NEG_INFINITY;
    let mut y = x;
    let mut extra = false;
    loop {
        y *= b;
        best = best.max(value(y)? - here);
        if extra {
            break;
        }
        if y < b * x_bar {
            extra = true;
        }
    }
    Ok(best)
}

/// Bellman residuals of the average criterion at `x`:
/// `c(x) - g + h'(x) a x^γ` and `sup_m [h(b^m x) - h(x)]`.
pub fn bellman_residual_avg(x: f64, profile: &RelativeValueProfile) -> Result<Residuals> {
    check_x(x)?;
    let s = &profile.solution;
    let c = reward_rate_unchecked(x, s.criterion.alpha, s.criterion.lambda);
    let flow = c - profile.bellman_gain + profile.derivative(x)? * s.flow.a * x.powf(s.flow.gamma);
    let impulse = impulse_sup(x, s.flow.b, s.x_bar, |y| profile.value(y))?;
    Ok(Residuals { flow, impulse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{segment_reward, time_to_reach, Weighting};

    fn sol(gamma: f64, alpha: f64, b: f64, lambda: f64) -> AverageSolution {
        let fp = FlowParams::new(0.2, b, gamma).unwrap();
        let cp = CriterionParams::average(alpha, lambda).unwrap();
        threshold_avg(&fp, &cp).unwrap()
    }

    #[test]
    fn aimd_reference_values() {
        let s = sol(0.0, 0.5, 0.5, 2.0);
        assert!((s.x_bar - 0.330_187_2).abs() < 5e-8, "{}", s.x_bar);
        // Cycle-integral oracle gives 0.4952808519.
        assert!((s.g - 0.495_280_851_9).abs() < 1e-10, "{}", s.g);
    }

    #[test]
    fn mimd_reference_values() {
        let s = sol(1.0, 0.5, 0.5, 2.0);
        assert!((s.x_bar - 0.343_145_8).abs() < 5e-8, "{}", s.x_bar);
        // Cycle-integral oracle (quadrature of c(x)/(a x) over [b x̄, x̄]) gives 0.49505467.
        assert!((s.g - 0.495_054_7).abs() < 5e-8, "{}", s.g);
    }

    #[test]
    fn threshold_is_independent_of_a() {
        let cp = CriterionParams::average(0.5, 2.0).unwrap();
        let s1 = threshold_avg(&FlowParams::new(0.2, 0.5, 0.0).unwrap(), &cp).unwrap();
        let s2 = threshold_avg(&FlowParams::new(7.0, 0.5, 0.0).unwrap(), &cp).unwrap();
        assert_eq!(s1.x_bar, s2.x_bar);
        assert_eq!(s1.g, s2.g);
    }

    #[test]
    fn parameter_errors() {
        let fp = FlowParams::new(0.2, 0.5, 0.5).unwrap();
        let zero = CriterionParams::average(0.5, 0.0).unwrap();
        assert_eq!(threshold_avg(&fp, &zero), Err(Error::ZeroPrice(0.0)));
        let degenerate = CriterionParams::average(1.5, 2.0).unwrap();
        assert!(matches!(
            threshold_avg(&fp, &degenerate),
            Err(Error::DegenerateExponent { .. })
        ));
        let one = CriterionParams {
            alpha: 1.0,
            lambda: 2.0,
            rho: None,
        };
        assert_eq!(threshold_avg(&fp, &one), Err(Error::AlphaOne));
    }

    #[test]
    fn cycle_average_equals_gain() {
        for gamma in [0.0f64, 0.3, 0.5, 1.0] {
            for alpha in [0.3, 0.5, 1.3, 1.5] {
                if (2.0 - alpha - gamma).abs() < 1e-12 {
                    continue;
                }
                let s = sol(gamma, alpha, 0.6, 1.5);
                let lo = s.flow.b * s.x_bar;
                let r = segment_reward(lo, s.x_bar, &s.flow, &s.criterion, Weighting::Average, 0.0)
                    .unwrap();
                let tau = time_to_reach(lo, s.x_bar, &s.flow).unwrap();
                assert!(
                    ((r / tau) / s.g - 1.0).abs() < 1e-9,
                    "gamma {gamma} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn gain_below_pointwise_maximum() {
        for gamma in [0.0f64, 0.5, 1.0] {
            for alpha in [0.3, 0.5, 1.3, 1.5, 2.5] {
                if (2.0 - alpha - gamma).abs() < 1e-12 {
                    continue;
                }
                for b in [0.1, 0.5, 0.9] {
                    let s = sol(gamma, alpha, b, 2.0);
                    assert!(s.g <= s.criterion.max_reward_rate());
                }
            }
        }
    }

    #[test]
    fn threshold_nonincreasing_in_b() {
        for gamma in [0.0f64, 0.5, 1.0] {
            for alpha in [0.3, 0.5, 1.3] {
                let xs: Vec<f64> = (1..=9)
                    .map(|i| sol(gamma, alpha, i as f64 / 10.0, 2.0).x_bar)
                    .collect();
                assert!(
                    xs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)),
                    "{xs:?}"
                );
            }
        }
    }

    #[test]
    fn relative_value_continuous_at_threshold() {
        for gamma in [0.0, 1.0] {
            let p = RelativeValueProfile::new(sol(gamma, 0.5, 0.5, 2.0));
            let x = p.solution.x_bar;
            let left = p.h0(x);
            let right = p.value(x).unwrap();
            assert!((left - right).abs() <= 1e-9 * left.abs().max(1.0));
        }
    }

    #[test]
    fn h0_matches_integral_of_its_derivative() {
        // h₀(x̄/2) - h₀(x̄/4) = ∫ (g - c)/(a x^γ) dx
        let p = RelativeValueProfile::new(sol(0.0, 0.5, 0.5, 2.0));
        let (lo, hi) = (p.solution.x_bar / 4.0, p.solution.x_bar / 2.0);
        let integral = crate::quad::integrate(
            |x| p.h0_prime(x),
            lo,
            hi,
            crate::quad::Tolerance::new(1e-13, 0.0),
        )
        .unwrap();
        assert!((p.h0(hi) - p.h0(lo) - integral).abs() < 1e-12);
    }

    #[test]
    fn residuals_at_reference_points() {
        for gamma in [0.0, 1.0] {
            let p = RelativeValueProfile::new(sol(gamma, 0.5, 0.5, 2.0));
            let x_bar = p.solution.x_bar;
            let inside = bellman_residual_avg(x_bar / 2.0, &p).unwrap();
            assert!(inside.flow.abs() < 1e-8);
            assert!(inside.impulse < 0.0);
            let above = bellman_residual_avg(1.5 * x_bar, &p).unwrap();
            assert!(above.impulse.abs() < 1e-8);
            assert!(above.flow <= 1e-12);
        }
    }

    #[test]
    fn perturbed_gain_breaks_flow_equation() {
        let s = sol(0.0, 1.3, 0.5, 2.0);
        let p = RelativeValueProfile::new(s).with_bellman_gain(1.01 * s.g);
        let r = bellman_residual_avg(s.x_bar / 2.0, &p).unwrap();
        assert!(r.flow > 1e-4, "{r:?}");
    }
}

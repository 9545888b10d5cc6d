//! Saw-tooth rate dynamics, impulses and the α-fair reward rate.
//!
//! Between congestion notifications a flow's sending rate follows
//! `dx/dt = a x^γ`; a notification carrying count `k` maps `x` to `b^k x`.
//! Every trajectory used by the crate is evaluated with the closed-form
//! solution of the growth equation, so event times are exact.
//!
//! The reward accumulated by a flow is `c(x) = x^{1-α}/(1-α) - λx`, either
//! time-averaged or discounted with `e^{-ρt}`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::quad::{integrate_log, Tolerance};

/// Tolerance of the adaptive quadrature used for discounted segments.
pub const SEGMENT_TOLERANCE: Tolerance = Tolerance::new(1e-11, 1e-14);

/// Per-flow dynamics constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Growth coefficient `a > 0`.
    pub a: f64,
    /// Multiplicative decrease factor `b` in `(0, 1)`.
    pub b: f64,
    /// Growth exponent `γ` in `[0, 1]`; 0 is AIMD, 1 is MIMD.
    pub gamma: f64,
}

impl FlowParams {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        let fp = Self { a, b, gamma };
        fp.validate()?;
        Ok(fp)
    }

    /// Additive increase, `γ = 0`.
    pub fn aimd(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("a", self.a)?;
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("must lie in (0, 1), got {}", self.b),
            });
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in [0, 1], got {}", self.gamma),
            });
        }
        Ok(())
    }
}

/// Fairness and pricing constants of the reward rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    /// Fairness exponent `α > 0`, `α != 1`.
    pub alpha: f64,
    /// Aggregated path price `λ >= 0`.
    pub lambda: f64,
    /// Discount rate `ρ > 0`; only present for the discounted criterion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl CriterionParams {
    pub fn average(alpha: f64, lambda: f64) -> Result<Self> {
        let cp = Self {
            alpha,
            lambda,
            rho: None,
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn discounted(alpha: f64, lambda: f64, rho: f64) -> Result<Self> {
        ensure_positive("rho", rho)?;
        let cp = Self {
            alpha,
            lambda,
            rho: Some(rho),
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite and >= 0, got {}", self.lambda),
            });
        }
        if let Some(rho) = self.rho {
            ensure_positive("rho", rho)?;
        }
        Ok(())
    }

    /// The discount rate, or an error naming the missing key.
    pub fn rho(&self) -> Result<f64> {
        self.rho.ok_or(Error::InvalidParameter {
            name: "rho",
            reason: "the discounted criterion needs a discount rate".into(),
        })
    }

    /// Maximiser `λ^{-1/α}` of the reward rate.
    pub fn best_rate(&self) -> f64 {
        self.lambda.powf(-1.0 / self.alpha)
    }

    /// Pointwise maximum `(α/(1-α)) λ^{(α-1)/α}` of the reward rate.
    pub fn max_reward_rate(&self) -> f64 {
        let a = self.alpha;
        a / (1.0 - a) * self.lambda.powf((a - 1.0) / a)
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    ensure_positive("alpha", alpha)?;
    if alpha == 1.0 {
        return Err(Error::AlphaOne);
    }
    Ok(())
}

/// Feedback policy: notify whenever the rate reaches `x_bar`, with as many
/// simultaneous notifications as needed to land below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub x_bar: f64,
    pub b: f64,
}

impl ThresholdPolicy {
    pub fn new(x_bar: f64, b: f64) -> Result<Self> {
        ensure_positive("x_bar", x_bar)?;
        FlowParams::new(1.0, b, 0.0)?;
        Ok(Self { x_bar, b })
    }

    /// Impulse count `v(x)`: `k` on `[x̄/b^{k-1}, x̄/b^k)`, 0 below `x̄`.
    pub fn count(&self, x: f64) -> u32 {
        self.land(x).1
    }

    /// Post-impulse rate and count. The landing point lies in `[b x̄, x̄)`
    /// whenever `x >= x̄`.
    pub fn land(&self, x: f64) -> (f64, u32) {
        debug_assert!(x.is_finite() && x > 0.0);
        let mut y = x;
        let mut k = 0;
        while y >= self.x_bar {
            y *= self.b;
            k += 1;
        }
        (y, k)
    }

    /// Left end `x̄ / b^{k-1}` of the interval where `v = k`.
    pub fn breakpoint(&self, k: u32) -> f64 {
        self.x_bar / self.b.powi(k as i32 - 1)
    }
}

/// Computes `x1^p - x0^p` without cancellation for nearby arguments.
pub(crate) fn pow_diff(x0: f64, x1: f64, p: f64) -> f64 {
    if p == 0.0 || x0 == x1 {
        return 0.0;
    }
    let log_ratio = ((x1 - x0) / x0).ln_1p();
    x0.powf(p) * (p * log_ratio).exp_m1()
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be finite and > 0, got {x}"
        )))
    }
}

/// Rate at time `dt` after starting from `x0` without notifications.
pub fn grow(x0: f64, dt: f64, fp: &FlowParams) -> Result<f64> {
    check_rate("x0", x0)?;
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("dt must be >= 0, got {dt}")));
    }
    Ok(grow_unchecked(x0, dt, fp))
}

pub(crate) fn grow_unchecked(x0: f64, dt: f64, fp: &FlowParams) -> f64 {
    let g = fp.gamma;
    if g == 0.0 {
        x0 + fp.a * dt
    } else if g == 1.0 {
        x0 * (fp.a * dt).exp()
    } else {
        let q = 1.0 - g;
        (x0.powf(q) + fp.a * q * dt).powf(1.0 / q)
    }
}

/// Time needed to grow from `x0` to `x1 >= x0`.
pub fn time_to_reach(x0: f64, x1: f64, fp: &FlowParams) -> Result<f64> {
    check_rate("x0", x0)?;
    check_rate("x1", x1)?;
    if x1 < x0 {
        return Err(Error::Domain(format!(
            "rates only grow between impulses: x1 = {x1} < x0 = {x0}"
        )));
    }
    Ok(time_to_reach_unchecked(x0, x1, fp))
}

pub(crate) fn time_to_reach_unchecked(x0: f64, x1: f64, fp: &FlowParams) -> f64 {
    let g = fp.gamma;
    if g == 0.0 {
        (x1 - x0) / fp.a
    } else if g == 1.0 {
        ((x1 - x0) / x0).ln_1p() / fp.a
    } else {
        let q = 1.0 - g;
        pow_diff(x0, x1, q) / (fp.a * q)
    }
}

/// Applies a composite impulse of `k` notifications: `b^k x`.
pub fn apply_impulse(x: f64, k: u32, b: f64) -> Result<f64> {
    check_rate("x", x)?;
    if k < 1 {
        return Err(Error::Domain("impulse count must be >= 1".into()));
    }
    Ok(x * b.powi(k as i32))
}

/// Reward rate `x^{1-α}/(1-α) - λ x`.
pub fn reward_rate(x: f64, cp: &CriterionParams) -> Result<f64> {
    check_rate("x", x)?;
    validate_alpha(cp.alpha)?;
    Ok(reward_rate_unchecked(x, cp.alpha, cp.lambda))
}

#[inline]
pub(crate) fn reward_rate_unchecked(x: f64, alpha: f64, lambda: f64) -> f64 {
    utility(x, alpha) - lambda * x
}

#[inline]
pub(crate) fn utility(x: f64, alpha: f64) -> f64 {
    x.powf(1.0 - alpha) / (1.0 - alpha)
}

/// Time weighting of the reward integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Plain time integral, used for long-run averages.
    Average,
    /// `e^{-ρt}`-weighted integral with `ρ` taken from the criterion.
    Discounted,
}

/// The two parts of a segment integral: `∫ x^{1-α}/(1-α) w dt` and `∫ x w dt`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentIntegrals {
    pub utility: f64,
    pub rate: f64,
}

impl SegmentIntegrals {
    pub fn reward(&self, lambda: f64) -> f64 {
        self.utility - lambda * self.rate
    }
}

impl std::ops::AddAssign for SegmentIntegrals {
    fn add_assign(&mut self, rhs: Self) {
        self.utility += rhs.utility;
        self.rate += rhs.rate;
    }
}

/// Utility and rate integrals over the growth segment from `x0` to `x1`,
/// which starts at absolute time `t0`.
pub fn segment_integrals(
    x0: f64,
    x1: f64,
    fp: &FlowParams,
    alpha: f64,
    weighting: Weighting,
    rho: f64,
    t0: f64,
) -> Result<SegmentIntegrals> {
    check_rate("x0", x0)?;
    check_rate("x1", x1)?;
    validate_alpha(alpha)?;
    if x1 < x0 {
        return Err(Error::Domain(format!(
            "segment must grow: x1 = {x1} < x0 = {x0}"
        )));
    }
    if x0 == x1 {
        return Ok(SegmentIntegrals::default());
    }
    let (a, g) = (fp.a, fp.gamma);
    match weighting {
        Weighting::Average => {
            // dt = dx / (a x^γ)
            let q = 2.0 - alpha - g;
            let utility = if q == 0.0 {
                ((x1 - x0) / x0).ln_1p() / (a * (1.0 - alpha))
            } else {
                pow_diff(x0, x1, q) / (a * (1.0 - alpha) * q)
            };
            let rate = pow_diff(x0, x1, 2.0 - g) / (a * (2.0 - g));
            Ok(SegmentIntegrals { utility, rate })
        }
        Weighting::Discounted => {
            if !(rho > 0.0) || !(t0 >= 0.0) {
                return Err(Error::Domain(format!(
                    "discounted segment needs rho > 0 and t0 >= 0, got rho = {rho}, t0 = {t0}"
                )));
            }
            let start = (-rho * t0).exp();
            if start == 0.0 {
                return Ok(SegmentIntegrals::default());
            }
            let weight =
                |x: f64| (-rho * time_to_reach_unchecked(x0, x, fp)).exp() / (a * x.powf(g));
            let u = integrate_log(|x| weight(x) * utility(x, alpha), x0, x1, SEGMENT_TOLERANCE)?;
            let r = integrate_log(|x| weight(x) * x, x0, x1, SEGMENT_TOLERANCE)?;
            Ok(SegmentIntegrals {
                utility: start * u,
                rate: start * r,
            })
        }
    }
}

/// `∫ c(x(t)) w(t) dt` over the growth segment from `x0` to `x1` starting at
/// absolute time `t0`; `w ≡ 1` or `w(t) = e^{-ρt}`.
pub fn segment_reward(
    x0: f64,
    x1: f64,
    fp: &FlowParams,
    cp: &CriterionParams,
    weighting: Weighting,
    t0: f64,
) -> Result<f64> {
    let rho = match weighting {
        Weighting::Average => 0.0,
        Weighting::Discounted => cp.rho()?,
    };
    segment_integrals(x0, x1, fp, cp.alpha, weighting, rho, t0).map(|s| s.reward(cp.lambda))
}

/// Links, routes, link prices and per-flow dynamics of a fluid network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `routing[l][k] == 1` iff flow `k` crosses link `l`.
    pub routing: Vec<Vec<u8>>,
    pub link_weights: Vec<f64>,
    pub flows: Vec<FlowParams>,
    pub alpha: f64,
}

impl NetworkSpec {
    pub fn new(
        routing: Vec<Vec<u8>>,
        link_weights: Vec<f64>,
        flows: Vec<FlowParams>,
        alpha: f64,
    ) -> Result<Self> {
        let net = Self {
            routing,
            link_weights,
            flows,
            alpha,
        };
        net.validate()?;
        Ok(net)
    }

    /// One flow on one link whose weight is the flow's price.
    pub fn single(flow: FlowParams, alpha: f64, price: f64) -> Result<Self> {
        Self::new(vec![vec![1]], vec![price], vec![flow], alpha)
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn n_links(&self) -> usize {
        self.link_weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, l) = (self.n_flows(), self.n_links());
        if n == 0 || l == 0 {
            return Err(Error::Validation(
                "network needs at least one flow and one link".into(),
            ));
        }
        if self.routing.len() != l {
            return Err(Error::Validation(format!(
                "routing has {} rows but there are {l} links",
                self.routing.len()
            )));
        }
        for (li, row) in self.routing.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "routing row {li} has {} entries but there are {n} flows",
                    row.len()
                )));
            }
            if row.iter().any(|&e| e > 1) {
                return Err(Error::Validation(format!(
                    "routing row {li} has entries other than 0/1"
                )));
            }
            if !row.contains(&1) {
                return Err(Error::Validation(format!("link {li} carries no flow")));
            }
        }
        for k in 0..n {
            if !self.routing.iter().any(|row| row[k] == 1) {
                return Err(Error::Validation(format!("flow {k} crosses no link")));
            }
        }
        for (li, &w) in self.link_weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Validation(format!(
                    "link weight {li} must be finite and >= 0, got {w}"
                )));
            }
        }
        for fp in &self.flows {
            fp.validate()?;
        }
        validate_alpha(self.alpha)
    }
}

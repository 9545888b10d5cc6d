//! Discounted criterion for additive increase (`γ = 0`) and `α ∈ (1, 2)`.
//!
//! Below the free boundary `x̄` the value function solves the linear ODE
//! `c(x) - ρ W̃(x) + a W̃'(x) = 0`, whose solutions form a one-parameter
//! family indexed by `w₁ = W̃(1)`:
//!
//! ```text
//! W̃(x) = e^{(ρ/a)(x-1)} (λ/ρ + λa/ρ² + 1/(ρ(α-1)) + w₁)
//!        - x^{1-α}/(ρ(α-1)) - λx/ρ - aλ/ρ² - (e^{ρx/a}/ρ) ∫₁ˣ e^{-ρu/a} u^{-α} du
//! ```
//!
//! The threshold is the unique positive root of `H`, the condition for
//! `W̃(x̄) = W̃(b x̄)` and `W̃'(x̄) = b W̃'(b x̄)` after eliminating `w₁`.
//! Above the threshold `W(x) = W(b x)`.
//!
//! Exponentials of `ρx/a` overflow quickly, so every integral is evaluated
//! with its exponential prefactor folded into the integrand.

use serde::{Deserialize, Serialize};

use crate::average_policy::{impulse_sup, Residuals};
use crate::error::{Error, Result};
use crate::model::{reward_rate_unchecked, CriterionParams, FlowParams, ThresholdPolicy};
use crate::quad::{integrate, integrate_log, Tolerance};
use crate::roots::refine_bracket;

const KERNEL_TOLERANCE: Tolerance = Tolerance::new(1e-12, 0.0);
const KERNEL_CUTOFF: f64 = 40.0;

/// Below this magnitude a value of `H` is treated as having no sign.
pub const H_SIGN_FLOOR: f64 = 1e-12;

/// Log-grid density used to bracket the root of `H`.
pub const SCAN_POINTS_PER_DECADE: usize = 64;

/// Relative width at which the root bracket is accepted.
pub const ROOT_REL_TOL: f64 = 1e-13;

/// Largest exponent passed to `exp` before switching to shifted forms.
const EXP_LIMIT: f64 = 700.0;

/// Validated parameters of the discounted problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountedParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl DiscountedParams {
    pub fn new(fp: &FlowParams, cp: &CriterionParams) -> Result<Self> {
        fp.validate()?;
        cp.validate()?;
        if fp.gamma != 0.0 {
            return Err(Error::Unsupported(format!(
                "the discounted criterion is solved for additive increase only (gamma = 0), got gamma = {}",
                fp.gamma
            )));
        }
        if !(cp.alpha > 1.0 && cp.alpha < 2.0) {
            return Err(Error::Unsupported(format!(
                "the discounted criterion needs alpha in (1, 2), got {}",
                cp.alpha
            )));
        }
        Ok(Self {
            a: fp.a,
            b: fp.b,
            alpha: cp.alpha,
            lambda: cp.lambda,
            rho: cp.rho()?,
        })
    }

    pub fn flow(&self) -> FlowParams {
        FlowParams {
            a: self.a,
            b: self.b,
            gamma: 0.0,
        }
    }

    pub fn criterion(&self) -> CriterionParams {
        CriterionParams {
            alpha: self.alpha,
            lambda: self.lambda,
            rho: Some(self.rho),
        }
    }

    /// `ρ / a`, the decay rate of the kernel in the rate variable.
    fn k(&self) -> f64 {
        self.rho / self.a
    }

    /// `λ/ρ + λa/ρ² + 1/(ρ(α-1))`.
    fn offset(&self) -> f64 {
        let (r, l) = (self.rho, self.lambda);
        l / r + l * self.a / (r * r) + 1.0 / (r * (self.alpha - 1.0))
    }

    fn reward(&self, x: f64) -> f64 {
        reward_rate_unchecked(x, self.alpha, self.lambda)
    }
}

/// `∫ e^{-k(u - shift)} u^{-α} du` over `[lo, hi]`, signed.
fn kernel(lo: f64, hi: f64, k: f64, alpha: f64, shift: f64) -> Result<f64> {
    if hi < lo {
        return kernel(hi, lo, k, alpha, shift).map(|v| -v);
    }
    // The integrand decreases; past lo + 40/k it is below e^{-40} of its
    // value at lo.
    let hi = if k > 0.0 {
        hi.min(lo + KERNEL_CUTOFF / k)
    } else {
        hi
    };
    if hi <= 4.0 * lo {
        // Narrow interval: integrate in t = u - lo so that k u never
        // passes through a rounded exp(s).
        let base = k * (lo - shift);
        return integrate(
            |t| (-base - k * t).exp() * (lo + t).powf(-alpha),
            0.0,
            hi - lo,
            KERNEL_TOLERANCE,
        );
    }
    integrate_log(
        |u| (-k * (u - shift)).exp() * u.powf(-alpha),
        lo,
        hi,
        KERNEL_TOLERANCE,
    )
}

/// `∫_lo^hi e^{-ρu/a} u^{-α} du`; reversed limits negate the result.
pub fn exp_power_integral(lo: f64, hi: f64, rho: f64, a: f64, alpha: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > 0.0) {
        return Err(Error::Domain(format!(
            "integration limits must be positive, got [{lo}, {hi}]"
        )));
    }
    if !(rho >= 0.0 && a > 0.0) {
        return Err(Error::Domain(format!(
            "need rho >= 0 and a > 0, got rho = {rho}, a = {a}"
        )));
    }
    kernel(lo, hi, rho / a, alpha, 0.0)
}

/// Width beyond which the tail `∫_Z^∞ e^{-(u-z)} u^{s-1} du` is below
/// `e^{-50} z^{s-1}`.
const GAMMA_WINDOW: f64 = 50.0;

/// `e^z Γ(s, z)` for `s < 1`, `z > 0`.
pub(crate) fn scaled_upper_gamma(s: f64, z: f64) -> Result<f64> {
    if !(s < 1.0 && z > 0.0) {
        return Err(Error::Domain(format!(
            "need s < 1 and z > 0, got s = {s}, z = {z}"
        )));
    }
    integrate_log(
        |u| (-(u - z)).exp() * u.powf(s - 1.0),
        z,
        z + GAMMA_WINDOW,
        Tolerance::new(1e-13, 0.0),
    )
}

/// Upper incomplete gamma `Γ(s, z) = ∫_z^∞ e^{-u} u^{s-1} du` for
/// `-1 < s < 0`, `z > 0`.
///
/// Quadrature on `[z, z + 50]`; the neglected tail is at most
/// `e^{-z-50} (z+50)^{s-1}`.
pub fn incomplete_gamma_upper(s: f64, z: f64) -> Result<f64> {
    if !(s > -1.0 && s < 0.0) {
        return Err(Error::Unsupported(format!(
            "incomplete gamma is implemented for -1 < s < 0, got s = {s}"
        )));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("need z > 0, got {z}")));
    }
    Ok((-z).exp() * scaled_upper_gamma(s, z)?)
}

/// Cumulative integrals `G_j = ∫₁^{u_j} e^{-ρu/a} u^{-α} du` on the nodes
/// `u_j = 2^{j/8}`, so `∫₁ˣ` costs one short panel per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelCache {
    k: f64,
    alpha: f64,
    j_min: i32,
    values: Vec<f64>,
}

const CACHE_STEP: f64 = std::f64::consts::LN_2 / 8.0;

impl PanelCache {
    fn build(p: &DiscountedParams, upper: f64) -> Result<Self> {
        let k = p.k();
        let upper = upper.max(2.0).min(EXP_LIMIT / k);
        let j_min = (1e-9f64.ln() / CACHE_STEP).floor() as i32;
        let j_max = (upper.ln() / CACHE_STEP).ceil().max(1.0) as i32;
        let node = |j: i32| (j as f64 * CACHE_STEP).exp();
        let mut values = vec![0.0; (j_max - j_min + 1) as usize];
        let zero = (-j_min) as usize;
        for j in 1..=j_max {
            let i = (j - j_min) as usize;
            values[i] = values[i - 1] + kernel(node(j - 1), node(j), k, p.alpha, 0.0)?;
        }
        for j in (j_min..0).rev() {
            let i = (j - j_min) as usize;
            values[i] = values[i + 1] - kernel(node(j), node(j + 1), k, p.alpha, 0.0)?;
        }
        debug_assert_eq!(values[zero], 0.0);
        Ok(Self {
            k,
            alpha: p.alpha,
            j_min,
            values,
        })
    }

    /// `∫₁ˣ e^{-ku} u^{-α} du`, or `None` outside the cached range.
    fn integral_from_one(&self, x: f64) -> Option<Result<f64>> {
        let j = (x.ln() / CACHE_STEP).round() as i64;
        let i = j - self.j_min as i64;
        if i < 0 || i >= self.values.len() as i64 {
            return None;
        }
        let u = (j as f64 * CACHE_STEP).exp();
        Some(kernel(u, x, self.k, self.alpha, 0.0).map(|v| self.values[i as usize] + v))
    }
}

/// `J(x) = e^{ρx/a} ∫₁ˣ e^{-ρu/a} u^{-α} du`.
fn j_term(x: f64, p: &DiscountedParams, cache: Option<&PanelCache>) -> Result<f64> {
    let k = p.k();
    if k * x <= EXP_LIMIT {
        if let Some(v) = cache.and_then(|c| c.integral_from_one(x)) {
            return Ok((k * x).exp() * v?);
        }
    }
    kernel(1.0, x, k, p.alpha, x)
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

fn w_tilde_with(x: f64, w1: f64, p: &DiscountedParams, cache: Option<&PanelCache>) -> Result<f64> {
    check_x(x)?;
    let (r, l, a, al) = (p.rho, p.lambda, p.a, p.alpha);
    Ok((p.k() * (x - 1.0)).exp() * (p.offset() + w1)
        - x.powf(1.0 - al) / (r * (al - 1.0))
        - l * x / r
        - a * l / (r * r)
        - j_term(x, p, cache)? / r)
}

fn w_tilde_prime_with(
    x: f64,
    w1: f64,
    p: &DiscountedParams,
    cache: Option<&PanelCache>,
) -> Result<f64> {
    check_x(x)?;
    let k = p.k();
    Ok(k * (k * (x - 1.0)).exp() * (p.offset() + w1)
        - p.lambda / p.rho
        - j_term(x, p, cache)? / p.a)
}

fn w_tilde_second_with(
    x: f64,
    w1: f64,
    p: &DiscountedParams,
    cache: Option<&PanelCache>,
) -> Result<f64> {
    check_x(x)?;
    let k = p.k();
    Ok(k * k * (k * (x - 1.0)).exp() * (p.offset() + w1)
        - (k * j_term(x, p, cache)? + x.powf(-p.alpha)) / p.a)
}

/// The ODE solution through `W̃(1) = w1`.
pub fn w_tilde(x: f64, w1: f64, p: &DiscountedParams) -> Result<f64> {
    w_tilde_with(x, w1, p, None)
}

/// Analytic `dW̃/dx`.
pub fn w_tilde_prime(x: f64, w1: f64, p: &DiscountedParams) -> Result<f64> {
    w_tilde_prime_with(x, w1, p, None)
}

/// Analytic `d²W̃/dx²`.
pub fn w_tilde_second(x: f64, w1: f64, p: &DiscountedParams) -> Result<f64> {
    w_tilde_second_with(x, w1, p, None)
}

/// Boundary constant `w₁*` selecting the ODE solution that satisfies the
/// transversality condition when no impulses are applied.
pub fn no_impulse_boundary(p: &DiscountedParams) -> Result<f64> {
    let (r, a, al, l) = (p.rho, p.a, p.alpha, p.lambda);
    let z = r / a;
    // e^{z} Γ(1-α, z) kept together to avoid overflow for large z.
    let tail = scaled_upper_gamma(1.0 - al, z)?;
    Ok(tail / r * z.powf(al - 1.0) - 1.0 / (r * (al - 1.0)) - l * (r + a) / (r * r))
}

/// Discounted value `W*` of never notifying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoImpulseValue {
    pub params: DiscountedParams,
    pub w1_star: f64,
}

impl NoImpulseValue {
    pub fn new(p: &DiscountedParams) -> Result<Self> {
        Ok(Self {
            params: *p,
            w1_star: no_impulse_boundary(p)?,
        })
    }

    /// `W*(x) = W̃(x; w₁*)`, evaluated as
    /// `(1/ρ) ∫ₓ^∞ e^{-ρ(u-x)/a} u^{-α} du - x^{1-α}/(ρ(α-1)) - λx/ρ - aλ/ρ²`,
    /// which avoids the `e^{ρx/a}` cancellation of the direct form.
    pub fn value(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let p = &self.params;
        let (r, l, a, al) = (p.rho, p.lambda, p.a, p.alpha);
        let k = p.k();
        let tail = kernel(x, x + GAMMA_WINDOW / k, k, al, x)?;
        Ok(tail / r - x.powf(1.0 - al) / (r * (al - 1.0)) - l * x / r - a * l / (r * r))
    }
}

/// `x^{1-α}(1-b^{1-α})/(α-1) + λx(1-b)`.
fn h_bracket(x: f64, p: &DiscountedParams) -> f64 {
    let (b, al) = (p.b, p.alpha);
    x.powf(1.0 - al) * (1.0 - b.powf(1.0 - al)) / (al - 1.0) + p.lambda * x * (1.0 - b)
}

/// `H(x) e^{-ρx(1-b)/a}`: same sign as `H`, finite for every `x > 0`.
pub fn free_boundary_scaled(x: f64, p: &DiscountedParams) -> Result<f64> {
    check_x(x)?;
    let (b, r, a, l) = (p.b, p.rho, p.a, p.lambda);
    let y = p.k() * x * (1.0 - b);
    let growth = -(-y).exp_m1();
    let inner = kernel(b * x, x, p.k(), p.alpha, b * x)?;
    Ok(growth * (1.0 - b) * l * a / r
        - (1.0 - b) * inner
        - (1.0 - b * (-y).exp()) * h_bracket(x, p))
}

/// The free-boundary function `H`; its unique positive root is `x̄`.
/// Overflows to `-inf` for very large `x`.
pub fn free_boundary(x: f64, p: &DiscountedParams) -> Result<f64> {
    let y = p.k() * x * (1.0 - p.b);
    Ok(y.exp() * free_boundary_scaled(x, p)?)
}

/// `w₁` from the value-matching condition at a given threshold.
pub fn boundary_constant(x_bar: f64, p: &DiscountedParams) -> Result<f64> {
    check_x(x_bar)?;
    let (b, r, a, l, al) = (p.b, p.rho, p.a, p.lambda, p.alpha);
    let k = p.k();
    // (e^{ρ/a}/ρ) ∫₁^x̄ e^{-ρu/a} u^{-α} du
    let first = kernel(1.0, x_bar, k, al, 1.0)? / r;
    // (e^{ρbx̄/a}/ρ) ∫_{bx̄}^{x̄} e^{-ρu/a} u^{-α} du
    let inner = kernel(b * x_bar, x_bar, k, al, b * x_bar)? / r;
    let numer = x_bar.powf(1.0 - al) * (1.0 - b.powf(1.0 - al)) / (r * (al - 1.0))
        + (1.0 - b) * l * x_bar / r
        + inner;
    let denom = ((r * b * x_bar - r) / a).exp() - ((r * x_bar - r) / a).exp();
    let _ = a;
    Ok(first - l * (r + a) / (r * r) - 1.0 / (r * (al - 1.0)) - numer / denom)
}

/// Threshold of the average criterion with the same reward rate:
/// `[2(1-b^{2-α}) / (λ(1-b²)(2-α))]^{1/α}`.
pub fn limit_threshold(p: &DiscountedParams) -> Result<f64> {
    let (b, al, l) = (p.b, p.alpha, p.lambda);
    if !(l > 0.0) {
        return Err(Error::ZeroPrice(l));
    }
    Ok((2.0 * (1.0 - b.powf(2.0 - al)) / (l * (1.0 - b * b) * (2.0 - al))).powf(1.0 / al))
}

/// Solved discounted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSolution {
    pub params: DiscountedParams,
    pub x_bar: f64,
    pub w1: f64,
    cache: PanelCache,
}

/// Serializable view of a [`DiscountedSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountedSummary {
    pub x_bar: f64,
    pub w1: f64,
    pub params: DiscountedParams,
}

impl DiscountedSolution {
    /// Builds a solution from an arbitrary `(x̄, w₁)` pair, e.g. to test
    /// that verification detects a wrong boundary.
    pub fn from_parts(params: DiscountedParams, x_bar: f64, w1: f64) -> Result<Self> {
        check_x(x_bar)?;
        let cache = PanelCache::build(&params, 4.0 * x_bar)?;
        Ok(Self {
            params,
            x_bar,
            w1,
            cache,
        })
    }

    pub fn summary(&self) -> DiscountedSummary {
        DiscountedSummary {
            x_bar: self.x_bar,
            w1: self.w1,
            params: self.params,
        }
    }

    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            x_bar: self.x_bar,
            b: self.params.b,
        }
    }

    pub fn w_tilde(&self, x: f64) -> Result<f64> {
        w_tilde_with(x, self.w1, &self.params, Some(&self.cache))
    }

    pub fn w_tilde_prime(&self, x: f64) -> Result<f64> {
        w_tilde_prime_with(x, self.w1, &self.params, Some(&self.cache))
    }

    pub fn w_tilde_second(&self, x: f64) -> Result<f64> {
        w_tilde_second_with(x, self.w1, &self.params, Some(&self.cache))
    }

    pub fn value_function(&self) -> ValueFunctionW {
        ValueFunctionW {
            solution: self.clone(),
        }
    }
}

/// One evaluated point of the `H` scan.
pub type ScanPoint = (f64, f64);

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..=n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / n as f64).exp())
        .collect()
}

/// Sign changes of the scaled `H` on a log grid: `(left, right, +1 for + -> -)`.
fn sign_changes(scan: &[ScanPoint]) -> Vec<(f64, f64, i8)> {
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &(x, h) in scan {
        if h.abs() <= H_SIGN_FLOOR || !h.is_finite() {
            continue;
        }
        if let Some((xl, hl)) = last {
            if hl.signum() != h.signum() {
                out.push((xl, x, if hl > 0.0 { 1 } else { -1 }));
            }
        }
        last = Some((x, h));
    }
    out
}

/// Evaluates the scaled `H` on a log grid over `[lo, hi]`.
pub fn scan_free_boundary(
    p: &DiscountedParams,
    lo: f64,
    hi: f64,
    per_decade: usize,
) -> Result<Vec<ScanPoint>> {
    log_grid(lo, hi, per_decade)
        .into_iter()
        .map(|x| free_boundary_scaled(x, p).map(|h| (x, h)))
        .collect()
}

/// Number of `+ -> -` and `- -> +` sign changes of `H` on a scan.
pub fn count_sign_changes(scan: &[ScanPoint]) -> (usize, usize) {
    let changes = sign_changes(scan);
    let down = changes.iter().filter(|c| c.2 == 1).count();
    (down, changes.len() - down)
}

/// Locates `x̄` by a log-grid scan of `H` over `[1e-4, 1e4]` (widened to
/// `[1e-8, 1e8]` if no crossing shows up), refines it, and computes `w₁`.
pub fn solve_threshold_disc(p: &DiscountedParams) -> Result<DiscountedSolution> {
    let ranges = [(1e-4, 1e4), (1e-6, 1e6), (1e-8, 1e8)];
    let mut last_scan = Vec::new();
    for &(lo, hi) in &ranges {
        let scan = scan_free_boundary(p, lo, hi, SCAN_POINTS_PER_DECADE)?;
        let changes = sign_changes(&scan);
        match changes.as_slice() {
            [] => {
                last_scan = scan;
                continue;
            }
            [(xl, xr, 1)] => {
                let x_bar = refine_bracket(|x| free_boundary_scaled(x, p), *xl, *xr, ROOT_REL_TOL)?;
                let w1 = boundary_constant(x_bar, p)?;
                return DiscountedSolution::from_parts(*p, x_bar, w1);
            }
            many => {
                return Err(Error::AmbiguousRoot {
                    crossings: many.iter().map(|c| 0.5 * (c.0 + c.1)).collect(),
                })
            }
        }
    }
    let (lo, hi) = ranges[ranges.len() - 1];
    Err(Error::NoRoot {
        lo,
        hi,
        scan: last_scan,
    })
}

/// Value function `W`: `W̃` below `x̄`, `W(x) = W(b x)` above.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunctionW {
    pub solution: DiscountedSolution,
}

impl ValueFunctionW {
    pub fn policy(&self) -> ThresholdPolicy {
        self.solution.policy()
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (y, _) = self.policy().land(x);
        self.solution.w_tilde(y)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (y, k) = self.policy().land(x);
        Ok(self.solution.params.b.powi(k as i32) * self.solution.w_tilde_prime(y)?)
    }

    /// `W` on the branch `k`: `W̃(b^k x)`.
    pub fn branch_value(&self, x: f64, k: u32) -> Result<f64> {
        self.solution
            .w_tilde(x * self.solution.params.b.powi(k as i32))
    }
}

/// `W(x)`.
#[allow(non_snake_case)]
pub fn W(x: f64, vf: &ValueFunctionW) -> Result<f64> {
    vf.value(x)
}

/// Bellman residuals of the discounted criterion at `x`:
/// `c(x) - ρW(x) + aW'(x)` and `sup_i [W(bⁱx) - W(x)]`.
pub fn bellman_residual_disc(x: f64, vf: &ValueFunctionW) -> Result<Residuals> {
    check_x(x)?;
    let p = &vf.solution.params;
    let flow = p.reward(x) - p.rho * vf.value(x)? + p.a * vf.derivative(x)?;
    let impulse = impulse_sup(x, p.b, vf.solution.x_bar, |y| vf.value(y))?;
    Ok(Residuals { flow, impulse })
}

/// One row of the diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub x: f64,
    pub w: f64,
    /// Locus where `dW̃/dx = 0`.
    pub z: f64,
    /// Locus where `d²W̃/dx² = 0`.
    pub v_infl: f64,
}

/// `z(x) = -(1/ρ)(x^{1-α}/(α-1) + λx)`.
pub fn stationary_locus(x: f64, p: &DiscountedParams) -> f64 {
    -(x.powf(1.0 - p.alpha) / (p.alpha - 1.0) + p.lambda * x) / p.rho
}

/// `a(x^{-α} - λ)/ρ² - (1/ρ)(x^{1-α}/(α-1) + λx)`.
pub fn inflection_locus(x: f64, p: &DiscountedParams) -> f64 {
    p.a * (x.powf(-p.alpha) - p.lambda) / (p.rho * p.rho) + stationary_locus(x, p)
}

/// Tabulates `W`, `z` and `v_infl` on `grid`.
pub fn diagnostic_curves(grid: &[f64], vf: &ValueFunctionW) -> Result<Vec<DiagnosticPoint>> {
    let p = &vf.solution.params;
    grid.iter()
        .map(|&x| {
            Ok(DiagnosticPoint {
                x,
                w: vf.value(x)?,
                z: stationary_locus(x, p),
                v_infl: inflection_locus(x, p),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_params() -> DiscountedParams {
        let fp = FlowParams::aimd(0.2, 0.5).unwrap();
        let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
        DiscountedParams::new(&fp, &cp).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn parameter_gate() {
        let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
        let mimd = FlowParams::new(0.2, 0.5, 1.0).unwrap();
        assert!(matches!(
            DiscountedParams::new(&mimd, &cp),
            Err(Error::Unsupported(_))
        ));
        let fp = FlowParams::aimd(0.2, 0.5).unwrap();
        let low = CriterionParams::discounted(0.5, 2.0, 1.0).unwrap();
        assert!(matches!(
            DiscountedParams::new(&fp, &low),
            Err(Error::Unsupported(_))
        ));
        let avg = CriterionParams::average(1.3, 2.0).unwrap();
        assert!(DiscountedParams::new(&fp, &avg).is_err());
    }

    #[test]
    fn exp_power_integral_examples() {
        assert_eq!(exp_power_integral(0.7, 0.7, 1.0, 0.2, 1.3).unwrap(), 0.0);
        let v = exp_power_integral(1.0, 2.0, 0.0, 1.0, 1.3).unwrap();
        let exact = (2f64.powf(-0.3) - 1.0) / -0.3;
        assert!(rel(v, exact) < 1e-13);
        let back = exp_power_integral(2.0, 1.0, 0.0, 1.0, 1.3).unwrap();
        assert_eq!(back, -v);
    }

    #[test]
    fn exp_power_integral_matches_riemann_sum() {
        let v = exp_power_integral(0.5, 1.0, 1.0, 0.2, 1.3).unwrap();
        let n = 1_000_000;
        let h = 0.5 / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| {
                let u = 0.5 + (i as f64 + 0.5) * h;
                (-5.0 * u).exp() * u.powf(-1.3)
            })
            .sum::<f64>()
            * h;
        assert!(rel(v, riemann) < 1e-9, "{v} vs {riemann}");
    }

    #[test]
    fn incomplete_gamma_properties() {
        for s in [-0.9, -0.5, -0.3, -0.1] {
            for z in [0.01, 0.5, 5.0, 30.0] {
                let g = incomplete_gamma_upper(s, z).unwrap();
                assert!(g > 0.0);
                // Γ(s+1, z) = s Γ(s, z) + z^s e^{-z}
                let up = (-z).exp() * scaled_upper_gamma(s + 1.0, z).unwrap();
                let rhs = s * g + z.powf(s) * (-z).exp();
                assert!(
                    (up - rhs).abs() <= 1e-10 * up.abs().max(1e-300),
                    "s {s} z {z}"
                );
            }
        }
        assert!(matches!(
            incomplete_gamma_upper(0.5, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            incomplete_gamma_upper(-1.5, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn incomplete_gamma_matches_brute_force() {
        // Midpoint sum on [5, 60] in the variable t = ln u plus the tail bound.
        let (s, z): (f64, f64) = (-0.3, 5.0);
        let (l0, l1) = (z.ln(), 60f64.ln());
        let n = 2_000_000;
        let h = (l1 - l0) / n as f64;
        let brute: f64 = (0..n)
            .map(|i| {
                let u = (l0 + (i as f64 + 0.5) * h).exp();
                (-u).exp() * u.powf(s)
            })
            .sum::<f64>()
            * h;
        let tail_bound = (-60f64).exp() * 60f64.powf(s - 1.0);
        let g = incomplete_gamma_upper(s, z).unwrap();
        assert!(
            (g - brute).abs() <= 1e-10 * g + tail_bound,
            "{g} vs {brute}"
        );
    }

    #[test]
    fn w_tilde_basic_identities() {
        let p = reference_params();
        assert!((w_tilde(1.0, -3.0, &p).unwrap() + 3.0).abs() < 1e-13);
        for x in [0.3, 0.6, 1.5] {
            let d = w_tilde(x, -2.0, &p).unwrap() - w_tilde(x, -5.0, &p).unwrap();
            let expected = 3.0 * (p.k() * (x - 1.0)).exp();
            assert!(rel(d, expected) < 1e-11);
        }
    }

    #[test]
    fn w_tilde_solves_its_ode() {
        let p = reference_params();
        let w1 = -4.9;
        for x in [0.3, 0.6, 1.5] {
            let h = 1e-6 * (1.0 + x);
            let fd =
                (w_tilde(x + h, w1, &p).unwrap() - w_tilde(x - h, w1, &p).unwrap()) / (2.0 * h);
            let residual = p.reward(x) - p.rho * w_tilde(x, w1, &p).unwrap() + p.a * fd;
            assert!(residual.abs() < 1e-6, "x {x}: {residual}");
        }
    }

    #[test]
    fn cached_and_direct_w_tilde_agree() {
        let p = reference_params();
        let s = DiscountedSolution::from_parts(p, 0.79, -4.93).unwrap();
        for x in [1e-6, 0.003, 0.1, 0.5, 0.79, 1.0, 2.5] {
            let a = s.w_tilde(x).unwrap();
            let b = w_tilde(x, -4.93, &p).unwrap();
            assert!(
                (a - b).abs() <= 1e-11 * b.abs().max(1.0),
                "x {x}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn no_impulse_value_properties() {
        let p = reference_params();
        let star = NoImpulseValue::new(&p).unwrap();
        for x in [0.05, 0.2, 0.5, 1.0, 2.0, 4.0] {
            let stable = star.value(x).unwrap();
            assert!(stable < 0.0);
            let direct = w_tilde(x, star.w1_star, &p).unwrap();
            assert!((stable - direct).abs() < 1e-8 * stable.abs(), "x {x}");
        }
        let t = 200.0 / p.rho;
        let far = star.value(1.0 + p.a * t).unwrap();
        assert!(((-p.rho * t).exp() * far).abs() <= 1e-6);
    }

    #[test]
    fn free_boundary_shape() {
        let p = reference_params();
        let h_small = free_boundary(1e-6, &p).unwrap();
        assert!(h_small > 0.0 && h_small < 1e-3, "{h_small}");
        assert!(free_boundary(10.0, &p).unwrap() < 0.0);
        assert!(free_boundary(1e4, &p).unwrap() < 0.0);
        assert!(free_boundary_scaled(1e4, &p).unwrap().is_finite());
    }

    #[test]
    fn reference_threshold_and_verified_boundary_constant() {
        let p = reference_params();
        let s = solve_threshold_disc(&p).unwrap();
        assert!((s.x_bar - 0.7901).abs() < 5e-4, "{}", s.x_bar);
        // 40-digit reference: x̄ = 0.79009703371394644, w₁ = -4.9289175989895754.
        assert!((s.x_bar - 0.790_097_033_713_946_4).abs() < 1e-10);
        assert!((s.w1 + 4.928_917_598_989_575).abs() < 1e-9, "{}", s.w1);
        assert!(free_boundary(s.x_bar, &p).unwrap().abs() < 1e-10);
        let vm = s.w_tilde(s.x_bar).unwrap() - s.w_tilde(p.b * s.x_bar).unwrap();
        let dm = s.w_tilde_prime(s.x_bar).unwrap() - p.b * s.w_tilde_prime(p.b * s.x_bar).unwrap();
        assert!(vm.abs() < 1e-7 && dm.abs() < 1e-7, "{vm} {dm}");
    }

    #[test]
    fn threshold_approaches_average_limit() {
        let base = reference_params();
        let limit = limit_threshold(&base).unwrap();
        let mut last = f64::INFINITY;
        for rho in [1.0, 0.1, 0.01, 0.001, 0.0001] {
            let p = DiscountedParams { rho, ..base };
            let err = (solve_threshold_disc(&p).unwrap().x_bar - limit).abs();
            assert!(err < last, "rho {rho}: {err} >= {last}");
            last = err;
        }
        assert!(last / limit < 1e-3);
    }

    #[test]
    fn limit_threshold_matches_average_formula() {
        let p = reference_params();
        let fp = p.flow();
        let cp = CriterionParams::average(p.alpha, p.lambda).unwrap();
        let avg = crate::average_policy::threshold_avg(&fp, &cp).unwrap();
        assert!(rel(limit_threshold(&p).unwrap(), avg.x_bar) < 1e-12);
        let dearer = DiscountedParams { lambda: 3.0, ..p };
        assert!(limit_threshold(&dearer).unwrap() < limit_threshold(&p).unwrap());
    }

    #[test]
    fn no_root_without_price() {
        let p = DiscountedParams {
            lambda: 0.0,
            ..reference_params()
        };
        let r = solve_threshold_disc(&p);
        assert!(
            matches!(r, Err(Error::NoRoot { .. })),
            "{:?}",
            r.map(|s| (s.x_bar, s.w1))
        );
    }

    #[test]
    fn value_function_dominates_no_impulse_value() {
        let p = reference_params();
        let vf = solve_threshold_disc(&p).unwrap().value_function();
        let star = NoImpulseValue::new(&p).unwrap();
        for x in [0.2, 0.5, 1.0, 2.0] {
            assert!(vf.value(x).unwrap() >= star.value(x).unwrap());
        }
    }

    #[test]
    fn value_function_continuous_at_threshold() {
        let vf = solve_threshold_disc(&reference_params())
            .unwrap()
            .value_function();
        let x = vf.solution.x_bar;
        let gap = vf.value(x * (1.0 - 1e-9)).unwrap() - vf.value(x * (1.0 + 1e-9)).unwrap();
        assert!(gap.abs() <= 1e-7);
    }

    #[test]
    fn residuals_at_reference_points() {
        let vf = solve_threshold_disc(&reference_params())
            .unwrap()
            .value_function();
        let x_bar = vf.solution.x_bar;
        assert!(bellman_residual_disc(x_bar / 2.0, &vf).unwrap().flow.abs() < 1e-7);
        for f in [1.01, 1.3, 1.7, 1.99] {
            assert!(bellman_residual_disc(f * x_bar, &vf).unwrap().flow <= 1e-9);
        }
        assert!(
            bellman_residual_disc(2.0 * x_bar * (1.0 + 1e-9), &vf)
                .unwrap()
                .impulse
                .abs()
                < 1e-7
        );
    }

    #[test]
    fn stationary_locus_is_negative() {
        let p = reference_params();
        for x in [1e-3, 0.1, 1.0, 10.0] {
            assert!(stationary_locus(x, &p) < 0.0);
        }
    }
}

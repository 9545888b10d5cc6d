//! Independent checks of the closed-form solutions.
//!
//! The scans evaluate the Bellman residuals of a candidate value function on
//! a log grid and compare value and slope on both sides of every impulse
//! breakpoint; [`grid_search_threshold`] finds the best threshold by
//! simulation only.

use serde::{Deserialize, Serialize};

use crate::average_policy::{bellman_residual_avg, RelativeValueProfile, Residuals};
use crate::discounted_policy::{
    bellman_residual_disc, inflection_locus, stationary_locus, DiscountedSolution, ValueFunctionW,
};
use crate::error::{Error, Result};
use crate::model::{reward_rate_unchecked, time_to_reach, CriterionParams, FlowParams};
use crate::netsim::{simulate, PolicySpec, SimConfig, SimCriterion};
use crate::roots::refine_bracket;

/// Relative distance kept between scan points and impulse breakpoints.
pub const BREAKPOINT_OFFSET: f64 = 1e-9;

/// A value function with a threshold impulse region that can be checked
/// against its Bellman equation.
pub trait BellmanCandidate {
    fn threshold(&self) -> f64;
    fn decrease(&self) -> f64;
    fn residuals(&self, x: f64) -> Result<Residuals>;
    /// Value on branch `k`, i.e. the sub-threshold solution at `b^k x`.
    fn branch_value(&self, x: f64, k: u32) -> Result<f64>;
    /// `d/dx` of [`BellmanCandidate::branch_value`].
    fn branch_derivative(&self, x: f64, k: u32) -> Result<f64>;
}

impl BellmanCandidate for RelativeValueProfile {
    fn threshold(&self) -> f64 {
        self.solution.x_bar
    }

    fn decrease(&self) -> f64 {
        self.solution.flow.b
    }

    fn residuals(&self, x: f64) -> Result<Residuals> {
        bellman_residual_avg(x, self)
    }

    fn branch_value(&self, x: f64, k: u32) -> Result<f64> {
        Ok(RelativeValueProfile::branch_value(self, x, k))
    }

    fn branch_derivative(&self, x: f64, k: u32) -> Result<f64> {
        let bk = self.solution.flow.b.powi(k as i32);
        Ok(bk * self.h0_prime(bk * x))
    }
}

impl BellmanCandidate for ValueFunctionW {
    fn threshold(&self) -> f64 {
        self.solution.x_bar
    }

    fn decrease(&self) -> f64 {
        self.solution.params.b
    }

    fn residuals(&self, x: f64) -> Result<Residuals> {
        bellman_residual_disc(x, self)
    }

    fn branch_value(&self, x: f64, k: u32) -> Result<f64> {
        ValueFunctionW::branch_value(self, x, k)
    }

    fn branch_derivative(&self, x: f64, k: u32) -> Result<f64> {
        let bk = self.solution.params.b.powi(k as i32);
        Ok(bk * self.solution.w_tilde_prime(bk * x)?)
    }
}

/// Grid and tolerances of a Bellman scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub breakpoint_offset: f64,
    /// Bound on the positive part of both residuals.
    pub tolerance: f64,
    /// Bound on the equalities: flow residual below the threshold, impulse
    /// residual above it, and value and slope gaps at breakpoints.
    pub equality_tolerance: f64,
}

impl ScanSpec {
    /// `points` log-spaced points over `[x̄/100, x̄/b⁵]`.
    pub fn around(x_bar: f64, b: f64, points: usize, tolerance: f64) -> Self {
        Self {
            lo: x_bar / 100.0,
            hi: x_bar / b.powi(5),
            points,
            breakpoint_offset: BREAKPOINT_OFFSET,
            tolerance,
            equality_tolerance: tolerance,
        }
    }

    /// The standard scan: 10⁴ points.
    pub fn standard<C: BellmanCandidate + ?Sized>(c: &C, tolerance: f64) -> Self {
        Self::around(c.threshold(), c.decrease(), 10_000, tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub spec: ScanSpec,
    pub threshold: f64,
    /// `max_x max(flow, impulse, 0)`.
    pub max_positive_residual: f64,
    pub worst_x: f64,
    /// `max |flow residual|` over grid points below the threshold.
    pub continuation_equality: f64,
    /// `max |impulse residual|` over grid points at or above the threshold.
    pub intervention_equality: f64,
    /// `max |branch(x_k, k-1) - branch(x_k, k)|` over breakpoints in range.
    pub continuity_gap: f64,
    /// Same for the derivatives (smooth fit). A shifted threshold leaves a
    /// value gap only quadratic in the shift but a slope gap linear in it.
    pub derivative_gap: f64,
    pub pass: bool,
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Moves `x` off the breakpoint `x̄ / b^j` it is within `offset` of, staying
/// on the same side.
fn nudge(x: f64, x_bar: f64, b: f64, offset: f64) -> f64 {
    if x < x_bar * (1.0 - offset) {
        return x;
    }
    let j = ((x / x_bar).ln() / (1.0 / b).ln()).round();
    let bp = x_bar / b.powf(j);
    let r = x / bp - 1.0;
    if r.abs() < offset {
        if r < 0.0 {
            bp * (1.0 - offset)
        } else {
            bp * (1.0 + offset)
        }
    } else {
        x
    }
}

/// Evaluates the Bellman residuals on the scan grid and the value and slope
/// gaps at the breakpoints `x̄ / b^{k-1}` inside `[lo, hi]`.
pub fn bellman_scan<C: BellmanCandidate + ?Sized>(
    candidate: &C,
    spec: &ScanSpec,
) -> Result<ScanReport> {
    if !(spec.lo > 0.0 && spec.hi > spec.lo && spec.points >= 2) {
        return Err(Error::Validation(format!(
            "scan needs 0 < lo < hi and at least 2 points, got [{}, {}] with {}",
            spec.lo, spec.hi, spec.points
        )));
    }
    let x_bar = candidate.threshold();
    let b = candidate.decrease();
    let mut max_pos = 0.0f64;
    let mut worst_x = spec.lo;
    let mut cont = 0.0f64;
    let mut interv = 0.0f64;
    for x in log_points(spec.lo, spec.hi, spec.points) {
        let x = nudge(x, x_bar, b, spec.breakpoint_offset);
        let r = candidate.residuals(x)?;
        if !(r.flow.is_finite() && r.impulse.is_finite()) {
            return Err(Error::Numeric(format!("non-finite residual at x = {x}")));
        }
        let pos = r.flow.max(r.impulse).max(0.0);
        if pos > max_pos {
            max_pos = pos;
            worst_x = x;
        }
        if x < x_bar {
            cont = cont.max(r.flow.abs());
        } else {
            interv = interv.max(r.impulse.abs());
        }
    }
    let mut gap = 0.0f64;
    let mut slope_gap = 0.0f64;
    let mut k = 1u32;
    loop {
        let bp = x_bar / b.powi(k as i32 - 1);
        if bp > spec.hi {
            break;
        }
        if bp >= spec.lo {
            let d = candidate.branch_value(bp, k - 1)? - candidate.branch_value(bp, k)?;
            gap = gap.max(d.abs());
            let s = candidate.branch_derivative(bp, k - 1)? - candidate.branch_derivative(bp, k)?;
            slope_gap = slope_gap.max(s.abs());
        }
        k += 1;
    }
    let pass = max_pos <= spec.tolerance
        && cont <= spec.equality_tolerance
        && interv <= spec.equality_tolerance
        && gap <= spec.equality_tolerance
        && slope_gap <= spec.equality_tolerance;
    Ok(ScanReport {
        spec: *spec,
        threshold: x_bar,
        max_positive_residual: max_pos,
        worst_x,
        continuation_equality: cont,
        intervention_equality: interv,
        continuity_gap: gap,
        derivative_gap: slope_gap,
        pass,
    })
}

/// Value-matching and derivative-matching residuals at the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PastingReport {
    /// `|W̃(x̄) - W̃(b x̄)|`.
    pub value: f64,
    /// `|W̃'(x̄) - b W̃'(b x̄)|`.
    pub derivative: f64,
    /// The residuals are compared with `tolerance · max(1, |W̃(x̄)|)`.
    pub tolerance: f64,
    pub pass: bool,
}

pub const PASTING_TOLERANCE: f64 = 1e-7;

pub fn pasting_check(sol: &DiscountedSolution) -> Result<PastingReport> {
    let (x, b) = (sol.x_bar, sol.params.b);
    let w_hi = sol.w_tilde(x)?;
    let value = (w_hi - sol.w_tilde(b * x)?).abs();
    let derivative = (sol.w_tilde_prime(x)? - b * sol.w_tilde_prime(b * x)?).abs();
    let scale = w_hi.abs().max(1.0);
    Ok(PastingReport {
        value,
        derivative,
        tolerance: PASTING_TOLERANCE,
        pass: value <= PASTING_TOLERANCE * scale && derivative <= PASTING_TOLERANCE * scale,
    })
}

/// A function with analytic derivatives of orders 0 to 2.
pub trait Evaluator {
    fn eval(&self, x: f64, order: u8) -> Result<f64>;
}

/// Wraps a closure `(x, order) -> value`.
pub struct FnEvaluator<F>(pub F);

impl<F: Fn(f64, u8) -> Result<f64>> Evaluator for FnEvaluator<F> {
    fn eval(&self, x: f64, order: u8) -> Result<f64> {
        (self.0)(x, order)
    }
}

fn order_error(order: u8) -> Error {
    Error::Domain(format!("derivative order must be 0, 1 or 2, got {order}"))
}

impl Evaluator for RelativeValueProfile {
    fn eval(&self, x: f64, order: u8) -> Result<f64> {
        match order {
            0 => self.value(x),
            1 => self.derivative(x),
            2 => {
                let (y, k) = self.policy().land(x);
                let s = &self.solution;
                let (a, g) = (s.flow.a, s.flow.gamma);
                let (alpha, lambda) = (s.criterion.alpha, s.criterion.lambda);
                // h₀'' = -c'/(a y^γ) - γ (g - c)/(a y^{γ+1})
                let c = reward_rate_unchecked(y, alpha, lambda);
                let dc = y.powf(-alpha) - lambda;
                let d2 = -dc / (a * y.powf(g)) - g * (s.g - c) / (a * y.powf(g + 1.0));
                Ok(s.flow.b.powi(2 * k as i32) * d2)
            }
            _ => Err(order_error(order)),
        }
    }
}

impl Evaluator for DiscountedSolution {
    fn eval(&self, x: f64, order: u8) -> Result<f64> {
        match order {
            0 => self.w_tilde(x),
            1 => self.w_tilde_prime(x),
            2 => self.w_tilde_second(x),
            _ => Err(order_error(order)),
        }
    }
}

impl Evaluator for ValueFunctionW {
    fn eval(&self, x: f64, order: u8) -> Result<f64> {
        let (y, k) = self.policy().land(x);
        let b = self.solution.params.b;
        match order {
            0 => self.value(x),
            1 => self.derivative(x),
            2 => Ok(b.powi(2 * k as i32) * self.solution.w_tilde_second(y)?),
            _ => Err(order_error(order)),
        }
    }
}

/// Largest `|d - fd| / (1 + |d|)` over the grid, where `d` is the analytic
/// derivative of the given order and `fd` the central difference of the
/// next lower order with step `1e-6 (1 + |x|)`.
pub fn fd_check<E: Evaluator + ?Sized>(ev: &E, grid: &[f64], order: u8) -> Result<f64> {
    if !(order == 1 || order == 2) {
        return Err(order_error(order));
    }
    let mut worst = 0.0f64;
    for &x in grid {
        let h = 1e-6 * (1.0 + x.abs());
        let fd = (ev.eval(x + h, order - 1)? - ev.eval(x - h, order - 1)?) / (2.0 * h);
        let d = ev.eval(x, order)?;
        worst = worst.max((d - fd).abs() / (1.0 + d.abs()));
    }
    Ok(worst)
}

/// Objective maximised by [`grid_search_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchObjective {
    /// Long-run average over one exact cycle from `b x̄`.
    Average,
    /// Discounted reward from `x0` over `[0, horizon]`.
    Discounted { x0: f64, horizon: f64 },
}

/// Simulated objective of the threshold policy at `x_bar`.
pub fn threshold_reward(
    fp: &FlowParams,
    cp: &CriterionParams,
    objective: SearchObjective,
    x_bar: f64,
) -> Result<f64> {
    let (x0, horizon, criterion) = match objective {
        SearchObjective::Average => (
            fp.b * x_bar,
            time_to_reach(fp.b * x_bar, x_bar, fp)?,
            SimCriterion::Average,
        ),
        SearchObjective::Discounted { x0, horizon } => {
            (x0, horizon, SimCriterion::Discounted { rho: cp.rho()? })
        }
    };
    let cfg = SimConfig::single(
        *fp,
        cp.alpha,
        cp.lambda,
        PolicySpec::Threshold { x_bar },
        x0,
        horizon,
        criterion,
    )?;
    Ok(simulate(&cfg)?.objective())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// `(threshold, reward)` in grid order.
    pub curve: Vec<(f64, f64)>,
    pub best_index: usize,
    pub best_threshold: f64,
    pub best_reward: f64,
}

impl GridSearch {
    /// True when the curve rises then falls, ignoring wiggles below `tol`.
    pub fn is_unimodal(&self, tol: f64) -> bool {
        let r: Vec<f64> = self.curve.iter().map(|p| p.1).collect();
        let peak = self.best_index;
        r[..=peak].windows(2).all(|w| w[1] >= w[0] - tol)
            && r[peak..].windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Whether `x` lies within one grid cell of the best threshold.
    pub fn within_one_step(&self, x: f64) -> bool {
        let i = self.best_index;
        let lo = self.curve[i.saturating_sub(1)].0;
        let hi = self.curve[(i + 1).min(self.curve.len() - 1)].0;
        x >= lo && x <= hi
    }
}

/// `points` log-spaced thresholds over `[center (1 - w), center (1 + w)]`.
pub fn threshold_grid(center: f64, w: f64, points: usize) -> Vec<f64> {
    log_points(center * (1.0 - w), center * (1.0 + w), points)
}

/// Simulates the threshold policy at every grid point and returns the best.
pub fn grid_search_threshold(
    fp: &FlowParams,
    cp: &CriterionParams,
    objective: SearchObjective,
    grid: &[f64],
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::Validation("empty threshold grid".into()));
    }
    let curve = grid
        .iter()
        .map(|&x| threshold_reward(fp, cp, objective, x).map(|r| (x, r)))
        .collect::<Result<Vec<_>>>()?;
    let best_index = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    Ok(GridSearch {
        best_threshold: curve[best_index].0,
        best_reward: curve[best_index].1,
        best_index,
        curve,
    })
}

/// Default discounted search objective for a grid: start below every
/// candidate and run until the discount factor is `e^{-40}`.
pub fn discounted_objective(
    fp: &FlowParams,
    cp: &CriterionParams,
    grid: &[f64],
) -> Result<SearchObjective> {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SearchObjective::Discounted {
        x0: fp.b * lo,
        horizon: 40.0 / cp.rho()?,
    })
}

/// Which diagnostic curve `W̃` is intersected with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    /// `z = c/ρ`; crossings are stationary points of `W̃`.
    Stationary,
    /// `v_infl`; crossings are inflection points of `W̃`.
    Inflection,
}

/// A crossing of `W̃` with a locus, and the derivative there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub x: f64,
    /// `W̃'` at a stationary crossing, `W̃''` at an inflection crossing.
    pub derivative: f64,
}

/// Finds every crossing of `W̃` with the locus on `[lo, hi]` by a log scan
/// of `n` points followed by bisection.
pub fn locus_crossings(
    sol: &DiscountedSolution,
    locus: Locus,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<Crossing>> {
    let p = sol.params;
    let gap = |x: f64| -> Result<f64> {
        let l = match locus {
            Locus::Stationary => stationary_locus(x, &p),
            Locus::Inflection => inflection_locus(x, &p),
        };
        Ok(sol.w_tilde(x)? - l)
    };
    let xs = log_points(lo, hi, n.max(2));
    let mut out = Vec::new();
    let mut prev = (xs[0], gap(xs[0])?);
    for &x in &xs[1..] {
        let g = gap(x)?;
        if g == 0.0 || g.signum() != prev.1.signum() {
            let root = refine_bracket(gap, prev.0, x, 1e-14)?;
            let derivative = match locus {
                Locus::Stationary => sol.w_tilde_prime(root)?,
                Locus::Inflection => sol.w_tilde_second(root)?,
            };
            out.push(Crossing {
                x: root,
                derivative,
            });
        }
        prev = (x, g);
    }
    Ok(out)
}

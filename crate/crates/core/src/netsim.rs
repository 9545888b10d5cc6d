//! Event-driven fluid simulator for a network of flows.
//!
//! Flows interact only through link prices, so each flow is simulated on
//! its own and the impulse traces are merged in `(time, flow)` order.
//! Threshold, fixed-period and no-impulse policies are exact: the next
//! event time is known in closed form and rewards are integrated per
//! inter-event segment. The RED-style baseline is stepped on a `Δt` grid
//! with one seeded ChaCha stream per flow.

use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    grow_unchecked, segment_integrals, time_to_reach_unchecked, utility, FlowParams, NetworkSpec,
    SegmentIntegrals, ThresholdPolicy, Weighting,
};
use crate::quad::{integrate, Tolerance};

/// Relative slack on the horizon when deciding whether an event is inside
/// it; absorbs the rounding of accumulated event times.
pub const HORIZON_SLACK: f64 = 1e-12;

/// JSON has no infinity; non-finite values travel as `"inf"`, `"-inf"`
/// or `"nan"`.
mod extended_float {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct V;

    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(V)
    }
}

/// Notification policy applied to one flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Notify at `x̄` with as many notifications as needed to land below it.
    Threshold { x_bar: f64 },
    /// Every `dt` seconds notify once with probability ramping linearly from
    /// 0 at `min_th` to `p_max` at `max_th`.
    Red {
        min_th: f64,
        max_th: f64,
        p_max: f64,
        dt: f64,
    },
    /// One notification at every multiple of `tau`; `tau = inf` never fires.
    FixedPeriod {
        #[serde(with = "extended_float")]
        tau: f64,
    },
    /// Never notify.
    None,
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        match *self {
            PolicySpec::Threshold { x_bar } if !(x_bar > 0.0 && x_bar.is_finite()) => bad(format!(
                "threshold x_bar must be finite and > 0, got {x_bar}"
            )),
            PolicySpec::Red {
                min_th,
                max_th,
                p_max,
                dt,
            } => {
                if !(min_th > 0.0 && max_th > min_th && max_th.is_finite()) {
                    bad(format!(
                        "red needs 0 < min_th < max_th, got {min_th}, {max_th}"
                    ))
                } else if !(p_max > 0.0 && p_max <= 1.0) {
                    bad(format!("red needs 0 < p_max <= 1, got {p_max}"))
                } else if !(dt > 0.0 && dt.is_finite()) {
                    bad(format!("red needs a finite step dt > 0, got {dt}"))
                } else {
                    Ok(())
                }
            }
            PolicySpec::FixedPeriod { tau } if !(tau > 0.0) => {
                bad(format!("fixed period tau must be > 0, got {tau}"))
            }
            _ => Ok(()),
        }
    }

    /// Notification probability of the RED ramp at rate `x`.
    pub fn red_probability(x: f64, min_th: f64, max_th: f64, p_max: f64) -> f64 {
        if x < min_th {
            0.0
        } else if x >= max_th {
            p_max
        } else {
            p_max * (x - min_th) / (max_th - min_th)
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PolicySpec::Threshold { x_bar } => write!(f, "threshold({x_bar})"),
            PolicySpec::Red {
                min_th,
                max_th,
                p_max,
                dt,
            } => write!(f, "red({min_th}, {max_th}, {p_max}, {dt})"),
            PolicySpec::FixedPeriod { tau } => write!(f, "fixed_period({tau})"),
            PolicySpec::None => write!(f, "none"),
        }
    }
}

/// Objective reported by a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimCriterion {
    Average,
    Discounted { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub network: NetworkSpec,
    /// One policy per flow.
    pub policies: Vec<PolicySpec>,
    /// One initial rate per flow.
    pub initial_rates: Vec<f64>,
    pub horizon: f64,
    pub criterion: SimCriterion,
    /// Seed of the RED streams; ignored by deterministic policies.
    pub seed: u64,
    /// Start of the averaging window; the average criterion ignores
    /// rewards earned before it.
    #[serde(default)]
    pub warmup: f64,
}

impl SimConfig {
    /// Single flow on a single link priced at `lambda`.
    pub fn single(
        flow: FlowParams,
        alpha: f64,
        lambda: f64,
        policy: PolicySpec,
        x0: f64,
        horizon: f64,
        criterion: SimCriterion,
    ) -> Result<Self> {
        Ok(Self {
            network: NetworkSpec::single(flow, alpha, lambda)?,
            policies: vec![policy],
            initial_rates: vec![x0],
            horizon,
            criterion,
            seed: 0,
            warmup: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let n = self.network.n_flows();
        if self.policies.len() != n {
            return Err(Error::Validation(format!(
                "{} policies for {n} flows",
                self.policies.len()
            )));
        }
        if self.initial_rates.len() != n {
            return Err(Error::Validation(format!(
                "{} initial rates for {n} flows",
                self.initial_rates.len()
            )));
        }
        for (k, &x) in self.initial_rates.iter().enumerate() {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Validation(format!(
                    "initial rate of flow {k} must be finite and > 0, got {x}"
                )));
            }
        }
        for p in &self.policies {
            p.validate()?;
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "horizon must be finite and > 0, got {}",
                self.horizon
            )));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::Validation(format!(
                "warmup must lie in [0, horizon), got {}",
                self.warmup
            )));
        }
        if let SimCriterion::Discounted { rho } = self.criterion {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Validation(format!(
                    "rho must be finite and > 0, got {rho}"
                )));
            }
        }
        Ok(())
    }

    fn rho(&self) -> Option<f64> {
        match self.criterion {
            SimCriterion::Average => None,
            SimCriterion::Discounted { rho } => Some(rho),
        }
    }
}

/// One impulse event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRecord {
    pub time: f64,
    pub flow: usize,
    /// Number of simultaneous notifications.
    pub count: u32,
    pub rate_before: f64,
    pub rate_after: f64,
    /// The flow's objective integral up to `time`: discounted under the
    /// discounted criterion, plain otherwise.
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// Decoupled price `λᵏ`.
    pub price: f64,
    pub policy: PolicySpec,
    /// Impulse events, each possibly carrying several notifications.
    pub impulses: u64,
    pub notifications: u64,
    /// Plain time integrals over `[warmup, T]`.
    pub average_integrals: SegmentIntegrals,
    /// `(∫ c dt) / (T - warmup)` with the flow's price.
    pub avg_reward: f64,
    /// Discounted integrals over `[0, T]`.
    pub discounted_integrals: Option<SegmentIntegrals>,
    pub disc_reward: Option<f64>,
    /// Bound on the neglected discounted reward after `T`; absent when no
    /// finite bound is available.
    pub truncation_bound: Option<f64>,
    pub final_rate: f64,
    /// Smallest and largest rate observed after the first impulse.
    pub post_impulse_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub horizon: f64,
    pub warmup: f64,
    pub criterion: SimCriterion,
    /// Total impulse events `N_T` over all flows.
    pub n_impulses: u64,
    /// Network objective per unit time, priced link by link.
    pub avg_reward: f64,
    /// Discounted network objective, priced link by link.
    pub disc_reward: Option<f64>,
    /// Sum of the per-flow truncation bounds.
    pub truncation_bound: Option<f64>,
    pub flows: Vec<FlowReport>,
    /// Impulses in time order; ties in ascending flow index.
    pub trace: Vec<ImpulseRecord>,
}

impl SimReport {
    /// The criterion's objective: `avg_reward` or `disc_reward`.
    pub fn objective(&self) -> f64 {
        self.disc_reward.unwrap_or(self.avg_reward)
    }
}

/// Per-flow prices `λᵏ = Σ_l routing[l][k] λ_l`.
pub fn decouple_prices(net: &NetworkSpec) -> Result<Vec<f64>> {
    net.validate()?;
    Ok((0..net.n_flows())
        .map(|k| {
            net.routing
                .iter()
                .zip(&net.link_weights)
                .filter(|(row, _)| row[k] == 1)
                .map(|(_, &w)| w)
                .sum()
        })
        .collect())
}

struct FlowRun<'a> {
    flow: usize,
    fp: &'a FlowParams,
    alpha: f64,
    price: f64,
    rho: Option<f64>,
    horizon: f64,
    warmup: f64,
    avg: SegmentIntegrals,
    disc: SegmentIntegrals,
    /// Undiscounted integrals over `[0, t]`, for the trace.
    plain: SegmentIntegrals,
    range: Option<(f64, f64)>,
    impulses: u64,
    notifications: u64,
    events: Vec<ImpulseRecord>,
}

impl<'a> FlowRun<'a> {
    /// Accumulates the growth segment from `(t0, x0)` to `(t1, x1)`.
    fn segment(&mut self, t0: f64, x0: f64, t1: f64, x1: f64) -> Result<()> {
        if t1 <= t0 || x1 <= x0 {
            return Ok(());
        }
        let plain = segment_integrals(x0, x1, self.fp, self.alpha, Weighting::Average, 0.0, 0.0)?;
        self.plain += plain;
        if t0 >= self.warmup {
            self.avg += plain;
        } else if t1 > self.warmup {
            let xw = grow_unchecked(x0, self.warmup - t0, self.fp).min(x1);
            self.avg +=
                segment_integrals(xw, x1, self.fp, self.alpha, Weighting::Average, 0.0, 0.0)?;
        }
        if let Some(rho) = self.rho {
            self.disc +=
                segment_integrals(x0, x1, self.fp, self.alpha, Weighting::Discounted, rho, t0)?;
        }
        Ok(())
    }

    fn impulse(&mut self, t: f64, before: f64, count: u32, after: f64) {
        self.impulses += 1;
        self.notifications += count as u64;
        self.range = Some(match self.range {
            None => (after, after),
            Some((lo, hi)) => (lo.min(after), hi.max(before)),
        });
        let cumulative = match self.rho {
            Some(_) => self.disc.reward(self.price),
            None => self.plain.reward(self.price),
        };
        self.events.push(ImpulseRecord {
            time: t,
            flow: self.flow,
            count,
            rate_before: before,
            rate_after: after,
            cumulative_reward: cumulative,
        });
    }

    fn observe(&mut self, x: f64) {
        if let Some((lo, hi)) = self.range {
            self.range = Some((lo.min(x), hi.max(x)));
        }
    }

    fn inside(&self, t: f64) -> bool {
        t <= self.horizon * (1.0 + HORIZON_SLACK)
    }

    /// Grows from `(t, x)` to the horizon; returns the final rate.
    fn finish(&mut self, t: f64, x: f64) -> Result<f64> {
        if t >= self.horizon {
            return Ok(x);
        }
        let xt = grow_unchecked(x, self.horizon - t, self.fp);
        self.segment(t, x, self.horizon, xt)?;
        self.observe(xt);
        Ok(xt)
    }

    fn run_threshold(&mut self, x0: f64, x_bar: f64) -> Result<f64> {
        let policy = ThresholdPolicy {
            x_bar,
            b: self.fp.b,
        };
        let mut t = 0.0;
        let mut x = x0;
        if x >= x_bar {
            let (y, k) = policy.land(x);
            self.impulse(0.0, x, k, y);
            x = y;
        }
        loop {
            let next = t + time_to_reach_unchecked(x, x_bar, self.fp);
            if !self.inside(next) {
                return self.finish(t, x);
            }
            self.segment(t, x, next, x_bar)?;
            let (y, k) = policy.land(x_bar);
            self.impulse(next, x_bar, k, y);
            debug_assert!(y >= self.fp.b * x_bar * (1.0 - 1e-15) && y < x_bar);
            t = next;
            x = y;
        }
    }

    fn run_fixed(&mut self, x0: f64, tau: f64) -> Result<f64> {
        let (mut t, mut x) = (0.0, x0);
        let mut n = 1u64;
        loop {
            let next = n as f64 * tau;
            if !self.inside(next) {
                return self.finish(t, x);
            }
            let before = grow_unchecked(x, next - t, self.fp);
            self.segment(t, x, next, before)?;
            let after = before * self.fp.b;
            self.impulse(next, before, 1, after);
            t = next;
            x = after;
            n += 1;
        }
    }

    fn run_red(
        &mut self,
        x0: f64,
        min_th: f64,
        max_th: f64,
        p_max: f64,
        dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let (mut t, mut x) = (0.0, x0);
        let mut n = 1u64;
        loop {
            let next = n as f64 * dt;
            if !self.inside(next) {
                return self.finish(t, x);
            }
            let before = grow_unchecked(x, next - t, self.fp);
            self.segment(t, x, next, before)?;
            let p = PolicySpec::red_probability(before, min_th, max_th, p_max);
            // 53 random mantissa bits in [0, 1).
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u < p {
                let after = before * self.fp.b;
                self.impulse(next, before, 1, after);
                x = after;
            } else {
                self.observe(before);
                x = before;
            }
            t = next;
            n += 1;
        }
    }
}

fn sup_abs_reward(lo: f64, hi: f64, alpha: f64, price: f64) -> f64 {
    // |c| is maximised at an end of the interval or at the interior
    // stationary point x^{-α} = λ.
    let c = |x: f64| (utility(x, alpha) - price * x).abs();
    let mut s = c(lo).max(c(hi));
    if price > 0.0 {
        let xs = price.powf(-1.0 / alpha);
        if xs > lo && xs < hi {
            s = s.max(c(xs));
        }
    }
    s
}

/// `Γ(p + 1)` for `p >= 1`.
fn gamma_plus_one(p: f64) -> Result<f64> {
    let upper = p + 40.0 * (p + 1.0).sqrt() + 80.0;
    integrate(
        |u| (-u).exp() * u.powf(p),
        0.0,
        upper,
        Tolerance::new(1e-10, 0.0),
    )
}

/// Upper bound on `∫_0^∞ e^{-ρs} x(s) ds` for the un-notified trajectory
/// starting at `x`.
fn growth_envelope(x: f64, fp: &FlowParams, rho: f64) -> Result<f64> {
    let (a, g) = (fp.a, fp.gamma);
    if g == 1.0 {
        return Ok(if rho > a {
            x / (rho - a)
        } else {
            f64::INFINITY
        });
    }
    if g == 0.0 {
        return Ok(x / rho + a / (rho * rho));
    }
    // x(s) = (x^{1-γ} + (1-γ)a s)^p with p = 1/(1-γ) >= 1, and
    // (u + v)^p <= 2^{p-1}(u^p + v^p).
    let p = 1.0 / (1.0 - g);
    let growth = ((1.0 - g) * a).powf(p) * gamma_plus_one(p)? / rho.powf(p + 1.0);
    Ok(2f64.powf(p - 1.0) * (x / rho + growth))
}

/// Bound on `|∫_T^∞ e^{-ρt} c(x(t)) dt|` given the rate `x_t` at `T`.
fn truncation_bound(
    policy: &PolicySpec,
    x_t: f64,
    fp: &FlowParams,
    alpha: f64,
    price: f64,
    rho: f64,
    horizon: f64,
) -> Result<Option<f64>> {
    let scale = (-rho * horizon).exp();
    let b = fp.b;
    let bound = match *policy {
        PolicySpec::Threshold { x_bar } => {
            // Confinement: the rate never leaves [min(x_T, b x̄), max(x_T, x̄)].
            let lo = x_t.min(b * x_bar);
            let hi = x_t.max(x_bar);
            scale * sup_abs_reward(lo, hi, alpha, price) / rho
        }
        _ => {
            // Envelope: impulses never raise the rate, so x(T+s) is below the
            // un-notified trajectory; `lo` is a floor on the rate.
            let lo = match *policy {
                PolicySpec::Red { min_th, .. } => (b * x_t).min(b * min_th),
                PolicySpec::FixedPeriod { tau } if tau.is_finite() => {
                    (b * x_t).min(fixed_period_floor(fp, tau))
                }
                _ => x_t,
            };
            if !(lo > 0.0) && alpha > 1.0 {
                return Ok(None);
            }
            let upper = growth_envelope(x_t, fp, rho)?;
            let util = if alpha > 1.0 {
                lo.powf(1.0 - alpha) / ((alpha - 1.0) * rho)
            } else {
                // x^{1-α} <= 1 + x
                (1.0 / rho + upper) / (1.0 - alpha)
            };
            scale * (util + price * upper)
        }
    };
    Ok(bound.is_finite().then_some(bound))
}

/// Fixed point of `x -> b grow(x, τ)`, the post-impulse floor of a
/// fixed-period trajectory; 0 when the trajectory can decay to zero.
fn fixed_period_floor(fp: &FlowParams, tau: f64) -> f64 {
    let (a, b, g) = (fp.a, fp.b, fp.gamma);
    if g == 1.0 {
        return if b * (a * tau).exp() >= 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let q = 1.0 - g;
    let bq = b.powf(q);
    (bq * q * a * tau / (1.0 - bq)).powf(1.0 / q)
}

/// Runs the simulation.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let net = &cfg.network;
    let prices = decouple_prices(net)?;
    let rho = cfg.rho();
    let span = cfg.horizon - cfg.warmup;
    let mut flows = Vec::with_capacity(net.n_flows());
    let mut trace = Vec::new();
    let mut utility_avg = 0.0;
    let mut utility_disc = 0.0;
    let mut rate_avg = vec![0.0; net.n_flows()];
    let mut rate_disc = vec![0.0; net.n_flows()];
    for (k, fp) in net.flows.iter().enumerate() {
        let mut run = FlowRun {
            flow: k,
            fp,
            alpha: net.alpha,
            price: prices[k],
            rho,
            horizon: cfg.horizon,
            warmup: cfg.warmup,
            avg: SegmentIntegrals::default(),
            disc: SegmentIntegrals::default(),
            plain: SegmentIntegrals::default(),
            range: None,
            impulses: 0,
            notifications: 0,
            events: Vec::new(),
        };
        let x0 = cfg.initial_rates[k];
        let policy = cfg.policies[k];
        let final_rate = match policy {
            PolicySpec::Threshold { x_bar } => run.run_threshold(x0, x_bar)?,
            PolicySpec::FixedPeriod { tau } => run.run_fixed(x0, tau)?,
            PolicySpec::None => run.finish(0.0, x0)?,
            PolicySpec::Red {
                min_th,
                max_th,
                p_max,
                dt,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(k as u64);
                run.run_red(x0, min_th, max_th, p_max, dt, &mut rng)?
            }
        };
        let bound = match rho {
            Some(r) => truncation_bound(
                &policy,
                final_rate,
                fp,
                net.alpha,
                prices[k],
                r,
                cfg.horizon,
            )?,
            None => None,
        };
        utility_avg += run.avg.utility;
        rate_avg[k] = run.avg.rate;
        utility_disc += run.disc.utility;
        rate_disc[k] = run.disc.rate;
        trace.append(&mut run.events);
        flows.push(FlowReport {
            price: prices[k],
            policy,
            impulses: run.impulses,
            notifications: run.notifications,
            average_integrals: run.avg,
            avg_reward: run.avg.reward(prices[k]) / span,
            discounted_integrals: rho.map(|_| run.disc),
            disc_reward: rho.map(|_| run.disc.reward(prices[k])),
            truncation_bound: bound,
            final_rate,
            post_impulse_range: run.range,
        });
    }
    trace.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.flow.cmp(&b.flow)));

    // Network objective priced per link, independently of the decoupled prices.
    let link_cost = |rates: &[f64]| -> f64 {
        net.routing
            .iter()
            .zip(&net.link_weights)
            .map(|(row, &w)| {
                w * row
                    .iter()
                    .zip(rates)
                    .filter(|(&e, _)| e == 1)
                    .map(|(_, &r)| r)
                    .sum::<f64>()
            })
            .sum()
    };
    let avg_reward = (utility_avg - link_cost(&rate_avg)) / span;
    let disc_reward = rho.map(|_| utility_disc - link_cost(&rate_disc));
    let truncation_bound = match rho {
        Some(_) => flows
            .iter()
            .map(|f| f.truncation_bound)
            .sum::<Option<f64>>(),
        None => None,
    };
    Ok(SimReport {
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        criterion: cfg.criterion,
        n_impulses: flows.iter().map(|f| f.impulses).sum(),
        avg_reward,
        disc_reward,
        truncation_bound,
        flows,
        trace,
    })
}

/// One row of a policy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub policies: Vec<PolicySpec>,
    /// `avg_reward` or `disc_reward`, following the criterion.
    pub reward: f64,
    pub per_flow_rewards: Vec<f64>,
    pub impulse_counts: Vec<u64>,
}

/// Simulates each variant and tabulates its objective. Variants must share
/// network, initial rates, horizon and criterion.
pub fn compare_policies(variants: &[SimConfig]) -> Result<Vec<ComparisonRow>> {
    let Some(first) = variants.first() else {
        return Ok(Vec::new());
    };
    for (i, v) in variants.iter().enumerate().skip(1) {
        if v.horizon != first.horizon {
            return Err(Error::Validation(format!(
                "variant {i} has horizon {} but variant 0 has {}",
                v.horizon, first.horizon
            )));
        }
        if v.network != first.network
            || v.initial_rates != first.initial_rates
            || v.criterion != first.criterion
        {
            return Err(Error::Validation(format!(
                "variant {i} differs from variant 0 in network, initial rates or criterion"
            )));
        }
    }
    variants
        .iter()
        .map(|cfg| {
            let r = simulate(cfg)?;
            let label = cfg
                .policies
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(" | ");
            Ok(ComparisonRow {
                label,
                policies: cfg.policies.clone(),
                reward: r.objective(),
                per_flow_rewards: r
                    .flows
                    .iter()
                    .map(|f| f.disc_reward.unwrap_or(f.avg_reward))
                    .collect(),
                impulse_counts: r.flows.iter().map(|f| f.impulses).collect(),
            })
        })
        .collect()
}

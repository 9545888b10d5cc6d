use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use impulse_cc::discounted_policy::diagnostic_curves;
use impulse_cc::netsim::{
    decouple_prices, simulate as run_sim, PolicySpec, SimConfig, SimCriterion, SimReport,
};
use impulse_cc::verify::{
    bellman_scan, discounted_objective, fd_check, grid_search_threshold, pasting_check,
    threshold_grid, BellmanCandidate, Evaluator, PastingReport, ScanReport, ScanSpec,
    SearchObjective,
};
use impulse_cc::{
    solve_threshold_disc, threshold_avg, CriterionParams, DiscountedParams, DiscountedSolution,
    FlowParams, NetworkSpec, RelativeValueProfile,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{config, Result};

/// CSV numbers: 17 significant digits, `.` decimal point.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Criterion {
    Average,
    Discounted { rho: f64 },
}

fn criterion(cfg: &RunConfig) -> Result<Criterion> {
    match cfg.require_str("criterion")? {
        "average" => Ok(Criterion::Average),
        "discounted" => Ok(Criterion::Discounted {
            rho: cfg.f64("rho")?,
        }),
        other => Err(config(format!(
            "key `criterion`: expected `average` or `discounted`, got `{other}`"
        ))),
    }
}

fn criterion_params(c: Criterion, alpha: f64, lambda: f64) -> Result<CriterionParams> {
    Ok(match c {
        Criterion::Average => CriterionParams::average(alpha, lambda)?,
        Criterion::Discounted { rho } => CriterionParams::discounted(alpha, lambda, rho)?,
    })
}

fn flow(cfg: &RunConfig) -> Result<FlowParams> {
    Ok(FlowParams::new(
        cfg.f64("a")?,
        cfg.f64("b")?,
        cfg.f64_or("gamma", 0.0)?,
    )?)
}

fn discounted_params(cfg: &RunConfig) -> Result<DiscountedParams> {
    let cp = CriterionParams::discounted(cfg.f64("alpha")?, cfg.f64("lambda")?, cfg.f64("rho")?)?;
    Ok(DiscountedParams::new(&flow(cfg)?, &cp)?)
}

pub fn threshold(cfg: &RunConfig) -> Result<String> {
    match criterion(cfg)? {
        Criterion::Average => {
            // x̄ and g do not depend on `a`.
            let fp = FlowParams::new(
                cfg.f64_or("a", 1.0)?,
                cfg.f64("b")?,
                cfg.f64_or("gamma", 0.0)?,
            )?;
            let cp = CriterionParams::average(cfg.f64("alpha")?, cfg.f64("lambda")?)?;
            Ok(serde_json::to_string_pretty(&threshold_avg(&fp, &cp)?)?)
        }
        Criterion::Discounted { .. } => {
            let sol = solve_threshold_disc(&discounted_params(cfg)?)?;
            Ok(serde_json::to_string_pretty(&sol.summary())?)
        }
    }
}

fn optimal_threshold(fp: &FlowParams, c: Criterion, alpha: f64, price: f64) -> Result<f64> {
    let cp = criterion_params(c, alpha, price)?;
    Ok(match c {
        Criterion::Average => threshold_avg(fp, &cp)?.x_bar,
        Criterion::Discounted { .. } => {
            solve_threshold_disc(&DiscountedParams::new(fp, &cp)?)?.x_bar
        }
    })
}

/// Largest list length over the per-flow keys.
fn flow_count(cfg: &RunConfig) -> usize {
    [
        "a", "b", "gamma", "policy", "x_bar", "min_th", "max_th", "p_max", "dt", "tau", "x0",
    ]
    .iter()
    .filter_map(|k| cfg.list(k).map(|v| v.len()))
    .max()
    .unwrap_or(1)
}

fn per_flow(cfg: &RunConfig, key: &str, n: usize, k: usize) -> Result<f64> {
    Ok(cfg.require_broadcast_f64(key, n)?[k])
}

pub fn sim_config(cfg: &RunConfig) -> Result<SimConfig> {
    let c = criterion(cfg)?;
    let alpha = cfg.f64("alpha")?;
    let (routing, link_weights) = match cfg.routing()? {
        Some(r) => {
            if cfg.has("lambda") {
                return Err(config(
                    "key `lambda` conflicts with `routing`; give link prices in `link_weights`",
                ));
            }
            let w = cfg.f64_list("link_weights")?.ok_or_else(|| {
                config("missing required key `link_weights` (flag --link-weights)")
            })?;
            (r, w)
        }
        None => {
            if cfg.has("link_weights") {
                return Err(config("key `link_weights` needs `routing`"));
            }
            (vec![vec![1; flow_count(cfg)]], vec![cfg.f64("lambda")?])
        }
    };
    let n = routing.first().map_or(0, Vec::len);
    let a = cfg.require_broadcast_f64("a", n)?;
    let b = cfg.require_broadcast_f64("b", n)?;
    let gamma = cfg.broadcast_f64("gamma", n)?.unwrap_or(vec![0.0; n]);
    let flows = (0..n)
        .map(|k| FlowParams::new(a[k], b[k], gamma[k]))
        .collect::<impulse_cc::Result<Vec<_>>>()?;
    let network = NetworkSpec::new(routing, link_weights, flows.clone(), alpha)?;
    let prices = decouple_prices(&network)?;

    let kinds = cfg
        .broadcast_str("policy", n)?
        .unwrap_or(vec!["optimal".into(); n]);
    let mut policies = Vec::with_capacity(n);
    for (k, kind) in kinds.iter().enumerate() {
        let p = match kind.as_str() {
            "optimal" => PolicySpec::Threshold {
                x_bar: optimal_threshold(&flows[k], c, alpha, prices[k])?,
            },
            "threshold" => PolicySpec::Threshold {
                x_bar: per_flow(cfg, "x_bar", n, k)?,
            },
            "red" => PolicySpec::Red {
                min_th: per_flow(cfg, "min_th", n, k)?,
                max_th: per_flow(cfg, "max_th", n, k)?,
                p_max: per_flow(cfg, "p_max", n, k)?,
                dt: per_flow(cfg, "dt", n, k)?,
            },
            "fixed_period" => PolicySpec::FixedPeriod {
                tau: per_flow(cfg, "tau", n, k)?,
            },
            "none" => PolicySpec::None,
            other => {
                return Err(config(format!(
                    "key `policy`: expected optimal, threshold, red, fixed_period or none, got `{other}`"
                )))
            }
        };
        p.validate()?;
        policies.push(p);
    }

    let sim = SimConfig {
        network,
        policies,
        initial_rates: cfg.require_broadcast_f64("x0", n)?,
        horizon: cfg.f64("horizon")?,
        criterion: match c {
            Criterion::Average => SimCriterion::Average,
            Criterion::Discounted { rho } => SimCriterion::Discounted { rho },
        },
        seed: cfg.u64_or("seed", 0)?,
        warmup: cfg.f64_or("warmup", 0.0)?,
    };
    sim.validate()?;
    Ok(sim)
}

pub fn simulate(cfg: &RunConfig) -> Result<SimReport> {
    Ok(run_sim(&sim_config(cfg)?)?)
}

pub fn trace_csv(report: &SimReport) -> String {
    let mut s = String::from("time,flow,rate_before,rate_after,impulse_count,cumulative_reward\n");
    for r in &report.trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(r.time),
            r.flow,
            num(r.rate_before),
            num(r.rate_after),
            r.count,
            num(r.cumulative_reward)
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    G,
    XBar,
    W1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub target: Target,
    pub factor: f64,
}

fn perturbation(cfg: &RunConfig) -> Result<Option<Perturbation>> {
    let Some(text) = cfg.str("inject_perturbation") else {
        return Ok(None);
    };
    let bad = || {
        config(format!(
            "key `inject_perturbation`: expected `g:F`, `x_bar:F` or `w1:F`, got `{text}`"
        ))
    };
    let (name, factor) = text.split_once(':').ok_or_else(bad)?;
    let target = match name.trim() {
        "g" => Target::G,
        "x_bar" => Target::XBar,
        "w1" => Target::W1,
        _ => return Err(bad()),
    };
    let factor: f64 = factor.trim().parse().map_err(|_| bad())?;
    if !factor.is_finite() {
        return Err(bad());
    }
    Ok(Some(Perturbation { target, factor }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub points: usize,
    /// Worst deviation of the analytic first derivative.
    pub first: f64,
    pub second: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub objective: SearchObjective,
    pub points: usize,
    pub best_threshold: f64,
    pub best_reward: f64,
    /// The candidate threshold is within one grid step of the best.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub criterion: String,
    pub perturbation: Option<Perturbation>,
    pub threshold: f64,
    pub scan: ScanReport,
    pub pasting: Option<PastingReport>,
    pub fd: FdReport,
    pub grid_search: GridReport,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Log grid over the scan range, kept `1e-3` (relative) away from the
/// breakpoints and from the origin so that central differences do not
/// straddle a kink.
fn fd_grid(spec: &ScanSpec, x_bar: f64, b: f64) -> Vec<f64> {
    let n = 200;
    let (l0, l1) = (spec.lo.ln(), spec.hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * (i as f64 + 0.5) / n as f64).exp())
        .filter(|&x| {
            if x <= 1e-3 {
                return false;
            }
            if x < x_bar * (1.0 - 1e-3) {
                return true;
            }
            let j = ((x / x_bar).ln() / (1.0 / b).ln()).round();
            (x / (x_bar / b.powf(j)) - 1.0).abs() > 1e-3
        })
        .collect()
}

struct Checks<'a> {
    cfg: &'a RunConfig,
    fp: FlowParams,
    cp: CriterionParams,
}

impl Checks<'_> {
    fn run<C: BellmanCandidate + Evaluator>(
        &self,
        candidate: &C,
        pasting: Option<PastingReport>,
        objective: impl FnOnce(&[f64]) -> Result<SearchObjective>,
        label: &str,
        perturbation: Option<Perturbation>,
    ) -> Result<VerifyReport> {
        let cfg = self.cfg;
        let tolerance = cfg.f64_or("tolerance", 1e-6)?;
        let mut spec = ScanSpec::standard(candidate, tolerance);
        spec.points = cfg.usize_or("points", spec.points)?;
        let scan = bellman_scan(candidate, &spec)?;

        let grid = fd_grid(&spec, candidate.threshold(), candidate.decrease());
        let fd_tolerance = cfg.f64_or("fd_tolerance", 1e-5)?;
        let first = fd_check(candidate, &grid, 1)?;
        let second = fd_check(candidate, &grid, 2)?;
        let fd = FdReport {
            points: grid.len(),
            first,
            second,
            tolerance: fd_tolerance,
            pass: first <= fd_tolerance && second <= fd_tolerance,
        };

        let points = cfg.usize_or("grid_points", 41)?;
        if points < 3 {
            return Err(config("key `grid_points`: need at least 3 points"));
        }
        let thresholds = threshold_grid(candidate.threshold(), 0.5, points);
        let objective = objective(&thresholds)?;
        let search = grid_search_threshold(&self.fp, &self.cp, objective, &thresholds)?;
        let grid_search = GridReport {
            objective,
            points,
            best_threshold: search.best_threshold,
            best_reward: search.best_reward,
            pass: search.within_one_step(candidate.threshold()),
        };

        let mut failures = Vec::new();
        if !scan.pass {
            failures.push(format!(
                "bellman scan: max residual {:e} at x = {}, equalities {:e} / {:e}, gaps {:e} / {:e}",
                scan.max_positive_residual,
                scan.worst_x,
                scan.continuation_equality,
                scan.intervention_equality,
                scan.continuity_gap,
                scan.derivative_gap
            ));
        }
        if let Some(p) = pasting.filter(|p| !p.pass) {
            failures.push(format!(
                "smooth pasting: value {:e}, derivative {:e}",
                p.value, p.derivative
            ));
        }
        if !fd.pass {
            failures.push(format!("finite differences: {first:e} / {second:e}"));
        }
        if !grid_search.pass {
            failures.push(format!(
                "grid search: best threshold {} is not within one step of {}",
                search.best_threshold,
                candidate.threshold()
            ));
        }
        Ok(VerifyReport {
            criterion: label.into(),
            perturbation,
            threshold: candidate.threshold(),
            scan,
            pasting,
            fd,
            grid_search,
            pass: failures.is_empty(),
            failures,
        })
    }
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let c = criterion(cfg)?;
    let pert = perturbation(cfg)?;
    let fp = flow(cfg)?;
    let cp = criterion_params(c, cfg.f64("alpha")?, cfg.f64("lambda")?)?;
    let checks = Checks { cfg, fp, cp };
    match c {
        Criterion::Average => {
            let mut profile = RelativeValueProfile::new(threshold_avg(&fp, &cp)?);
            match pert {
                None => {}
                Some(Perturbation {
                    target: Target::G,
                    factor,
                }) => {
                    let g = profile.solution.g;
                    profile = profile.with_bellman_gain(g * factor);
                }
                Some(Perturbation {
                    target: Target::XBar,
                    factor,
                }) => {
                    let x = profile.solution.x_bar;
                    profile = profile.with_threshold(x * factor);
                }
                Some(Perturbation {
                    target: Target::W1, ..
                }) => return Err(config(
                    "key `inject_perturbation`: `w1` exists only under the discounted criterion",
                )),
            }
            checks.run(
                &profile,
                None,
                |_| Ok(SearchObjective::Average),
                "average",
                pert,
            )
        }
        Criterion::Discounted { .. } => {
            let p = DiscountedParams::new(&fp, &cp)?;
            let mut sol = solve_threshold_disc(&p)?;
            match pert {
                None => {}
                Some(Perturbation {
                    target: Target::XBar,
                    factor,
                }) => {
                    sol = DiscountedSolution::from_parts(p, sol.x_bar * factor, sol.w1)?;
                }
                Some(Perturbation {
                    target: Target::W1,
                    factor,
                }) => {
                    sol = DiscountedSolution::from_parts(p, sol.x_bar, sol.w1 * factor)?;
                }
                Some(Perturbation {
                    target: Target::G, ..
                }) => {
                    return Err(config(
                        "key `inject_perturbation`: `g` exists only under the average criterion",
                    ))
                }
            }
            let pasting = pasting_check(&sol)?;
            let vf = sol.value_function();
            checks.run(
                &vf,
                Some(pasting),
                |grid| Ok(discounted_objective(&fp, &cp, grid)?),
                "discounted",
                pert,
            )
        }
    }
}

pub fn figure(cfg: &RunConfig) -> Result<String> {
    let p = discounted_params(cfg)?;
    let grid = match cfg.f64_list("grid")? {
        Some(g) => g,
        None => {
            let lo = cfg.f64_or("lo", 0.05)?;
            let hi = cfg.f64_or("hi", 3.0)?;
            let n = cfg.usize_or("points", 500)?;
            if !(lo > 0.0 && hi > lo) {
                return Err(config(format!(
                    "keys `lo`, `hi`: need 0 < lo < hi, got {lo}, {hi}"
                )));
            }
            if n < 2 {
                return Err(config("key `points`: need at least 2 points"));
            }
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    };
    if let Some(x) = grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(config(format!(
            "key `grid`: rates must be finite and > 0, got {x}"
        )));
    }
    let vf = solve_threshold_disc(&p)?.value_function();
    let mut s = String::from("x,W,z,v_infl\n");
    for d in diagnostic_curves(&grid, &vf)? {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(d.x),
            num(d.w),
            num(d.z),
            num(d.v_infl)
        );
    }
    Ok(s)
}

//! `impulse-cc`: solve, simulate, verify and tabulate threshold policies.
//!
//! Exit codes: 0 success, 2 configuration error, 3 no threshold root,
//! 4 verification failure, 1 anything else.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Parser)]
#[command(
    name = "impulse-cc",
    version,
    about = "Optimal impulsive congestion control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Optimal threshold with its gain (average) or boundary constant (discounted).
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Simulate a network of flows and write the impulse trace and summary.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Bellman scan, smooth pasting, derivative and grid-search checks.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Table of W, z and v_infl for plotting (discounted criterion).
    Figure {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        figure: FigureArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `average` or `discounted`.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    /// Link rows separated by `;`, entries by `,` (e.g. `1,0,1;1,1,0`).
    #[arg(long)]
    routing: Option<String>,
    #[arg(long)]
    link_weights: Option<String>,
    /// `optimal`, `threshold`, `red`, `fixed_period` or `none`, per flow.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    x_bar: Option<String>,
    #[arg(long)]
    min_th: Option<String>,
    #[arg(long)]
    max_th: Option<String>,
    #[arg(long)]
    p_max: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Write the impulse trace as CSV to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// `g:F`, `x_bar:F` or `w1:F`: multiply one quantity by `F` first.
    #[arg(long)]
    inject_perturbation: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    /// Scan points.
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    #[arg(long)]
    fd_tolerance: Option<String>,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long)]
    lo: Option<String>,
    #[arg(long)]
    hi: Option<String>,
    #[arg(long)]
    points: Option<String>,
    /// Explicit comma-separated grid; overrides lo, hi and points.
    #[arg(long)]
    grid: Option<String>,
}

fn put(cfg: &mut RunConfig, pairs: &[(&str, &Option<String>)]) -> Result<()> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(())
}

impl ModelArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        put(
            &mut cfg,
            &[
                ("criterion", &self.criterion),
                ("a", &self.a),
                ("b", &self.b),
                ("gamma", &self.gamma),
                ("alpha", &self.alpha),
                ("lambda", &self.lambda),
                ("rho", &self.rho),
            ],
        )?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Threshold { model } => {
            let cfg = model.load()?;
            commands::emit(model.out.as_deref(), &commands::threshold(&cfg)?)
        }
        Command::Simulate { model, sim } => {
            let mut cfg = model.load()?;
            put(
                &mut cfg,
                &[
                    ("routing", &sim.routing),
                    ("link_weights", &sim.link_weights),
                    ("policy", &sim.policy),
                    ("x_bar", &sim.x_bar),
                    ("min_th", &sim.min_th),
                    ("max_th", &sim.max_th),
                    ("p_max", &sim.p_max),
                    ("dt", &sim.dt),
                    ("tau", &sim.tau),
                    ("x0", &sim.x0),
                    ("horizon", &sim.horizon),
                    ("warmup", &sim.warmup),
                    ("seed", &sim.seed),
                ],
            )?;
            let report = commands::simulate(&cfg)?;
            if let Some(path) = &sim.trace {
                std::fs::write(path, commands::trace_csv(&report))?;
            }
            commands::emit(
                model.out.as_deref(),
                &serde_json::to_string_pretty(&report)?,
            )
        }
        Command::Verify { model, verify } => {
            let mut cfg = model.load()?;
            put(
                &mut cfg,
                &[
                    ("inject_perturbation", &verify.inject_perturbation),
                    ("tolerance", &verify.tolerance),
                    ("points", &verify.points),
                    ("grid_points", &verify.grid_points),
                    ("fd_tolerance", &verify.fd_tolerance),
                ],
            )?;
            let report = commands::verify(&cfg)?;
            commands::emit(
                model.out.as_deref(),
                &serde_json::to_string_pretty(&report)?,
            )?;
            if report.pass {
                Ok(())
            } else {
                Err(error::CliError::Verification(report.failures.join("; ")))
            }
        }
        Command::Figure { model, figure } => {
            let mut cfg = model.load()?;
            put(
                &mut cfg,
                &[
                    ("lo", &figure.lo),
                    ("hi", &figure.hi),
                    ("points", &figure.points),
                    ("grid", &figure.grid),
                ],
            )?;
            commands::emit(model.out.as_deref(), &commands::figure(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("impulse-cc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Optimal impulsive congestion control.
//!
//! A flow's sending rate grows continuously as `dx/dt = a x^γ` and is cut
//! to `b^k x` by congestion notifications. For the reward rate
//! `c(x) = x^{1-α}/(1-α) - λx` the optimal notification policy is a
//! threshold: notify as soon as the rate reaches `x̄`.
//!
//! - [`model`]: dynamics, policies and segment integrals.
//! - [`average_policy`]: long-run average criterion, closed form.
//! - [`discounted_policy`]: discounted criterion for additive increase.
//! - [`netsim`]: event-driven fluid simulator for networks of flows.
//! - [`verify`]: Bellman residual scans and independent checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod average_policy;
pub mod discounted_policy;
pub mod error;
pub mod model;
pub mod netsim;
pub mod quad;
mod roots;
pub mod verify;

pub use average_policy::{
    bellman_residual_avg, relative_value, threshold_avg, AverageSolution, RelativeValueProfile,
    Residuals,
};
pub use discounted_policy::{
    bellman_residual_disc, solve_threshold_disc, DiscountedParams, DiscountedSolution,
    NoImpulseValue, ValueFunctionW,
};
pub use error::{Error, Result};
pub use model::{CriterionParams, FlowParams, NetworkSpec, ThresholdPolicy};
pub use quad::Tolerance;

use thiserror::Error;

/// Errors raised by the solvers, the simulator and the verification scans.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates its invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `alpha == 1` (logarithmic utility) is not supported.
    #[error("alpha = 1 (proportional fairness limit) is not supported")]
    AlphaOne,

    /// The average-criterion threshold requires a strictly positive price.
    #[error("the link price lambda must be strictly positive, got {0}")]
    ZeroPrice(f64),

    /// `2 - alpha - gamma == 0` makes the closed forms degenerate.
    #[error("degenerate exponent: 2 - alpha - gamma = 0 (alpha = {alpha}, gamma = {gamma})")]
    DegenerateExponent { alpha: f64, gamma: f64 },

    /// The parameter combination is outside the range handled by the solver.
    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error(
        "quadrature on [{lo}, {hi}] did not converge: estimate {estimate:e}, \
         error {error:e}, {intervals} intervals"
    )]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// No `+ -> -` sign change of the free-boundary function was found.
    #[error("no sign change of H found on [{lo:e}, {hi:e}] ({} scan points)", scan.len())]
    NoRoot {
        lo: f64,
        hi: f64,
        scan: Vec<(f64, f64)>,
    },

    /// More than one sign change of the free-boundary function was found.
    #[error("H changes sign {} times; expected exactly one + -> - crossing", crossings.len())]
    AmbiguousRoot { crossings: Vec<f64> },

    /// A numerical routine produced a non-finite value or failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A simulation or network configuration is malformed.
    #[error("invalid configuration: {0}")]
    Validation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

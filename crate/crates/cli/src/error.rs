use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] impulse_cc::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 0 success, 2 config error, 3 no root, 4 verification failure, 1 other.
    pub fn exit_code(&self) -> u8 {
        use impulse_cc::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::NoRoot { .. } | E::AmbiguousRoot { .. } => 3,
                E::Domain(_)
                | E::InvalidParameter { .. }
                | E::AlphaOne
                | E::ZeroPrice(_)
                | E::DegenerateExponent { .. }
                | E::Unsupported(_)
                | E::Validation(_) => 2,
                E::Quadrature { .. } | E::Numeric(_) => 1,
            },
            CliError::Verification(_) => 4,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

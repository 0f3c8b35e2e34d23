use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Each variant maps onto one process exit code (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("numerical error: {context} (last residual {residual:.3e})")]
    Numerical { context: String, residual: f64 },

    #[error("degenerate equilibrium: {0}")]
    Degenerate(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            context: context.into(),
            residual,
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 capacity,
    /// 5 model-assumption violation, 74 output/io failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::Config(_) | Error::Domain { .. } => 2,
            Error::Json(_) => 2,
            Error::Numerical { .. } | Error::Degenerate(_) => 3,
            Error::Capacity(_) => 4,
            Error::ModelAssumption(_) => 5,
            Error::Io(_) | Error::Csv(_) => 74,
        }
    }
}

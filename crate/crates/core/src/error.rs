use thiserror::Error;

/// Errors raised by the reference generators and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible point at t = {t}: constraint {index} has slack {slack:e}")]
    Infeasible { index: usize, slack: f64, t: f64 },

    #[error("no strictly feasible point found at t = {t}")]
    InfeasibleProblem { t: f64 },

    #[error("singular Hessian at t = {t} (even after regularization)")]
    Singular { t: f64 },

    #[error("pointwise solve failed at timestamp {t}: {source}")]
    Timestamp {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("malformed csv: {0}")]
    Csv(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised anywhere in the fitting and forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad input shape, domain or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An optimizer or root finder stopped without meeting its tolerance.
    #[error("no convergence after {iterations} iterations: {message} (last iterate {last:?})")]
    NoConvergence {
        message: String,
        iterations: usize,
        last: Vec<f64>,
    },

    /// A fitted model violates one of its structural constraints.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// Something numerically impossible happened (non-finite likelihood etc).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Artifacts produced by different pipeline runs do not line up.
    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    /// Error annotated with the pipeline stage that produced it.
    #[error("[{stage}] {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn at_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical problem rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Numerical(_) | Error::Constraint(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

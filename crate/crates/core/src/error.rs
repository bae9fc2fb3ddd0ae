use thiserror::Error;

/// Errors produced while building scenarios or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Two points that must be distinct coincide (or a distance is non-positive).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The sensing error is exactly zero, so the channel error term is undefined.
    #[error("perfect sensing: channel error is zero")]
    PerfectSensing,

    /// Zero sensing power makes the target unobservable.
    #[error("infinite CRB: sensing power is zero")]
    InfiniteCrb,

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The power box cannot meet the budget equality.
    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("oracle grid too large: {combinations} combinations (limit {limit})")]
    OracleTooLarge { combinations: u128, limit: u128 },

    /// A sub-solver failed inside an outer iteration.
    #[error("iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateGeometry(msg.into())
    }

    /// Attach outer-iteration context.
    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::Solver {
            iteration,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Solver { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

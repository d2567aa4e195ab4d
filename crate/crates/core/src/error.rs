use thiserror::Error;

/// Errors produced by the solvers and their input validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("eigenfunction lost positivity at node {node} (value {value:.3e})")]
    LostPositivity { node: usize, value: f64 },

    #[error("iteration escaped: sup-norm {sup_norm:.3e} exceeded the cap {cap:.3e}")]
    Escaped { sup_norm: f64, cap: f64 },

    #[error("time step collapsed below dt_min = {dt_min:.3e} at t = {t:.6e}: {reason}")]
    StepCollapse { t: f64, dt_min: f64, reason: String },

    #[error("trajectory integrity violated: {0}")]
    Integrity(String),

    #[error("continuation failed at lambda = {lambda}: {source}")]
    Continuation { lambda: f64, source: Box<Error> },

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    /// Whether the error stems from the user's input rather than a solver.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Precondition(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

/// Attaches the name of the failing stage to an error.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage: stage.to_string(),
            source: Box::new(e),
        })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

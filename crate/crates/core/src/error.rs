use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown named parameter set `{0}`")]
    UnknownParameterSet(String),

    #[error("unknown base-quantity tag `{0}`")]
    UnknownQuantity(String),

    #[error("E_star must be positive, got {0}")]
    NonPositiveEStar(f64),

    #[error("singular limiter gains at rho = {rho}: {what}")]
    SingularGain { rho: f64, what: &'static str },

    #[error("rho solver failed after {iterations} iterations, last bracket [{lo}, {hi}]")]
    RhoSolver { lo: f64, hi: f64, iterations: usize },

    #[error("Newton solve did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigenvector matrix is near-defective (condition number {0:e})")]
    NearDefective(f64),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("step size underflow at t = {t} s (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("at t = {t} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid solver configuration: {0}")]
    SolverConfig(String),

    #[error("trace grids differ: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn parse(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures raised by a numerical solver (root finding,
    /// integration, eigenanalysis) as opposed to input or I/O errors.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::AtTime { source, .. } => source.is_solver_failure(),
            Error::RhoSolver { .. }
            | Error::NewtonFailed { .. }
            | Error::SingularGain { .. }
            | Error::StepUnderflow { .. }
            | Error::NonFinite(_)
            | Error::NearDefective(_)
            | Error::Eigen => true,
            _ => false,
        }
    }
}

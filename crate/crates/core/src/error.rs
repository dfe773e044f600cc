use thiserror::Error;

/// Errors raised by the wave, operator and evolution routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian on the even subspace (bifurcation point?) at omega = {omega}")]
    Bifurcation { omega: f64 },

    #[error("solution collapsed onto a constant state (amplitude {amplitude:.3e})")]
    DegenerateBranch { amplitude: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("operator is nearly singular on the complement of its kernel (eigenvalue {eigenvalue:.3e})")]
    NearSingular { eigenvalue: f64 },

    #[error("right-hand side has a kernel component {component:.3e} above tolerance {tolerance:.3e}")]
    Incompatible { component: f64, tolerance: f64 },

    #[error("criterion not applicable: {0}")]
    NotApplicable(String),

    #[error("solution blew up at t = {time}")]
    Blowup { time: f64 },

    #[error("continuation failed at parameter {parameter}")]
    Continuation {
        parameter: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

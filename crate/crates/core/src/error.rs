use thiserror::Error;

/// Errors raised by the geometry, variation, spectral and flow routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("profile is not positive at node {node} (value {value})")]
    NonPositiveProfile { node: usize, value: f64 },

    #[error("conformal factor is not finite at node ({radial}, {angular})")]
    NonFiniteConformalFactor { radial: usize, angular: usize },

    #[error("invalid dimension {0}: {1}")]
    InvalidDimension(usize, &'static str),

    #[error("backend or grid mismatch: {0}")]
    BackendMismatch(String),

    #[error("operation `{0}` is not available on the conformal 2D backend")]
    UnsupportedBackend(&'static str),

    #[error("variation violates the conformal boundary condition (residual {residual:e} > {tolerance:e})")]
    ConformalViolation { residual: f64, tolerance: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("principal eigenfunction changes sign (min {min:e}, max {max:e})")]
    SignFlip { min: f64, max: f64 },

    #[error("coefficient matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("no root with positive imaginary part (imaginary parts {0:e}, {1:e})")]
    DegenerateRoot(f64, f64),

    #[error("boundary rows are rank deficient at zeta = {zeta:?}, z = {z_re}+{z_im}i (min singular value {min_sv:e})")]
    RankDeficient {
        zeta: Vec<f64>,
        z_re: f64,
        z_im: f64,
        min_sv: f64,
    },

    #[error("step rejected at t = {time}: {reason}")]
    StepRejected { time: f64, reason: String },

    #[error("flow blew up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("bad flow configuration: {0}")]
    BadConfig(String),

    #[error("diffeomorphism lost monotonicity at t = {time} near node {node}")]
    MonotonicityLoss { time: f64, node: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

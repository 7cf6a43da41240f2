use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("hermite order {0} exceeds the supported maximum of 64")]
    HermiteOrder(usize),

    #[error("grid too coarse for n_max = {n_max}: spacing {spacing} must stay below {limit}")]
    Nyquist { n_max: usize, spacing: f64, limit: f64 },

    #[error("field is not sampled on the expected grid")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian at iteration {iteration} (residual {residual:.3e})")]
    JacobianSingular { iteration: usize, residual: f64 },

    #[error("branch {0} could not be started from its initial guess")]
    BranchStart(String),

    #[error("branch did not terminate inside the requested range")]
    NotTerminated,

    #[error("state is not a converged stationary state: {0}")]
    NotConverged(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("amplitude too small along the winding loop (|psi| = {0:.3e})")]
    AmplitudeTooSmall(f64),

    #[error("lost vortex: {0}")]
    LostVortex(String),

    #[error("non-finite value encountered at step {step}")]
    BlowUp { step: usize },

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed input {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

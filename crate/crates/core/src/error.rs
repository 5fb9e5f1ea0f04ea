use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time mesh: {0}")]
    InvalidMesh(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("histories live on different time meshes")]
    MeshMismatch,

    #[error("Hermitian symmetry violated: imaginary residue {residue:.3e} (relative)")]
    HermitianViolation { residue: f64 },

    #[error("symbol is singular at mode {k:?} which carries a nonzero coefficient")]
    SingularSymbol { k: [i64; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported integrability exponent p = {0}")]
    UnsupportedExponent(f64),

    #[error("forcing member {member} is not divergence-free (relative residual {residual:.3e})")]
    NotSolenoidal { member: usize, residual: f64 },

    #[error("noise table has {noise} directions but the forcing has {forcing}")]
    DirectionMismatch { noise: usize, forcing: usize },

    #[error("exact sampling needs time-independent forcing")]
    TimeDependentForcing,

    #[error("ratio undefined: zero denominator")]
    UndefinedRatio,

    #[error("quadrature did not reach tolerance: estimate {estimate:.6e}, error {error:.3e} after {evals} evaluations")]
    Quadrature {
        estimate: f64,
        error: f64,
        evals: usize,
    },

    #[error("no local window: T fell below {min_t} before the linear part became small (last epsilon {epsilon:.4e}, threshold {threshold:.4e})")]
    NoLocalWindow {
        min_t: f64,
        epsilon: f64,
        threshold: f64,
    },

    #[error("global smallness gate failed: 4·epsilon·c = {product:.4e} is not below 1")]
    SmallnessViolated { product: f64 },

    #[error("Picard iteration did not converge in {} iterations", .diffs.len())]
    NonConvergence { diffs: Vec<f64> },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for bad input, 3 when no existence window or
    /// gate was found, 4 for non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_)
            | Self::InvalidGrid(_)
            | Self::InvalidMesh(_)
            | Self::Snapshot(_)
            | Self::NotSolenoidal { .. }
            | Self::DirectionMismatch { .. }
            | Self::TimeDependentForcing => 2,
            Self::NoLocalWindow { .. } | Self::SmallnessViolated { .. } => 3,
            Self::NonConvergence { .. } => 4,
            _ => 1,
        }
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::linalg::MAX_DIM)]
    TooLarge(usize),

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("non-finite value in input")]
    NonFinite,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    Convergence { sweeps: usize, off_norm: f64 },

    #[error("outcome {index} has zero probability in the current state")]
    ImpossibleOutcome { index: usize },

    #[error("eigenvalues {0} and {1} are degenerate")]
    DegenerateSpectrum(f64, f64),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error("script error: {0}")]
    Script(String),
    #[error("output error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

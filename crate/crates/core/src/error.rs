use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |H - H^dag| = {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("function undefined at eigenvalue {0}")]
    Domain(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("apparatus dimension {apparatus} is smaller than system dimension {system}")]
    DimensionError { system: usize, apparatus: usize },

    #[error("invalid measurement model: {0}")]
    InvalidModel(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("E_R bracket inverted: lower {lower} > upper {upper}")]
    BracketInversion { lower: f64, upper: f64 },

    #[error("probe '{0}' failed: {1}")]
    ProbeFailure(String, String),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QwError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate spectrum: |lambda_{index}| = {value:.3e} below tolerance {tol:.3e}")]
    DegenerateSpectrum { index: usize, value: f64, tol: f64 },

    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QwError>;

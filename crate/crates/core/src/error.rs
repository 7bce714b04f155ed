use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("equilibrium error at cell {cell}: {reason}")]
    Equilibrium { cell: usize, reason: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("spectral error: {reason} (residual {residual:e})")]
    Spectral { reason: String, residual: f64 },

    #[error("functional calculus error: {0}")]
    Calculus(String),

    #[error("time step failed at t = {t}: {reason}")]
    Step { t: f64, reason: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}

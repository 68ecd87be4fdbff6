use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid/spectrum size mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {got} (need {need})")]
    UnsupportedDimension { got: usize, need: &'static str },

    #[error("integrator instability at t = {time}: energy grew by factor {factor:.3e} in one step")]
    Instability { time: f64, factor: f64 },

    #[error("exponent estimates not converged: max variation {variation:.3e} between averaging halves (limit {limit:.3e})")]
    NonConverged { variation: f64, limit: f64 },

    #[error("insufficient samples: {got} past burn-in, need {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("insufficient modes: have {have}, need {need}")]
    InsufficientModes { have: usize, need: usize },

    #[error("rank-deficient family: pivot {pivot:.3e} below 1e-12 at column {column}")]
    RankDeficient { pivot: f64, column: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

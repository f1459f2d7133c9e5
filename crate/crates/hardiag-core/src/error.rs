use thiserror::Error;

/// Errors surfaced by the diagnostics library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Quadratic form vanishes on the support of the covariance; the sign
    /// event is degenerate and the caller decides the convention.
    #[error("degenerate quadratic form: all eigenvalues below the clipping threshold")]
    DegenerateForm,

    /// Text or file input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A critical-value search was refused because the verdict engine
    /// certified size one; the witness frequency is attached.
    #[error("refused: size is one for every critical value (witness frequency {gamma})")]
    RefusedSizeOne { gamma: f64 },

    /// File I/O problem.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The circulant smoother has a zero transform coefficient and cannot be
    /// inverted, so the dictionary does not exist for this length.
    #[error("smoothing length {len} has a zero transform coefficient at {n} bins; pick a length coprime with the bin count")]
    SingularSmoother { len: usize, n: usize },

    #[error("edge vector yields a negative level {value:.3e} at bin {bin}")]
    NegativePsd { bin: usize, value: f64 },

    #[error("scenario generation did not reach nonnegative PSDs after {tries} attempts")]
    GenerationInfeasible { tries: usize },

    #[error("scenario generation infeasible at group {gos}, trial {trial} (after {tries} attempts)")]
    GenerationInfeasibleAt { gos: usize, trial: usize, tries: usize },

    #[error("equality-constrained solve ended infeasible: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("pilot signal is identically zero; the link filter is unidentifiable")]
    ZeroPilot,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

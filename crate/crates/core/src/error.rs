//! Error type shared by all modules in the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error for model construction, simulation and estimation routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside its physical domain (negative rate, zero
    /// frequency, probability outside `[0, 1]`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system or normal-equation matrix could not be solved.
    #[error("singular system: {0}")]
    Singular(String),

    /// A feature expected in the data (dip, peak, half-maximum crossing)
    /// could not be located.
    #[error("detection failed: {0}")]
    Detection(String),

    /// The requested operation needs data outside the sampled range.
    #[error("insufficient coverage: {0}")]
    Coverage(String),

    /// An iterative routine stopped before reaching its accuracy goal.
    #[error("accuracy not reached: {0}")]
    Accuracy(String),

    /// A sampling grid is malformed (empty, unordered, or too coarse).
    #[error("bad sampling: {0}")]
    Sampling(String),

    /// Too few scans (or trials) to carry out the requested analysis.
    #[error("insufficient scans: {0}")]
    InsufficientScans(String),

    /// A model evaluation produced NaN or infinity during fitting.
    #[error("non-finite residual: {0}")]
    NonFiniteResidual(String),

    /// Underlying I/O failure while reading or writing data files.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A data or configuration file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

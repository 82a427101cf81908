//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation received an input outside its physical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or parameter set, detected before a run starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver failed to converge.
    #[error("numerical error: {0}")]
    Convergence(String),

    /// The integrator produced a non-finite state mid-run.
    #[error("simulation aborted at t = {t:.3} s: {reason}")]
    Aborted { t: f64, reason: String },

    /// Metrics from different traces were combined.
    #[error("lap metrics stem from different traces (id {candidate:#x} vs {reference:#x})")]
    TraceMismatch { candidate: u64, reference: u64 },

    /// A sweep produced no usable points.
    #[error("sweep error: {0}")]
    Sweep(String),

    /// No gain recommendation could be made.
    #[error("no recommendation: {0}")]
    NoRecommendation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a bad configuration rather than a
    /// runtime failure. The CLI maps these to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::TomlParse(_))
    }
}

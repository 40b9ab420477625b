use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// Commanded specific force too small to define a thrust axis.
    #[error("degenerate thrust command (|a| = {norm:e})")]
    DegenerateThrust { norm: f64 },

    /// Desired thrust axis points (almost) straight down.
    #[error("attitude singularity: b3_z = {b3_z}")]
    AttitudeSingularity { b3_z: f64 },

    #[error("estimate unavailable: {0}")]
    EstimateUnavailable(String),

    #[error("integration fault at step {step}: non-finite state")]
    IntegrationFault { step: u64 },

    #[error("controller divergence at t = {time:.3} s: position error {error:.2} m")]
    Divergence { time: f64, error: f64 },

    #[error("fault-tolerant contract violated: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
}

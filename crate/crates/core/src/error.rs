use thiserror::Error;

/// Errors produced by the modelling, estimation and clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block model: {0}")]
    InvalidSpec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate degrees: {0}")]
    DegenerateDegree(String),

    #[error("stabilization failed after {iterations} iterations (last spectral radius {rho:.6})")]
    StabilizationFailed { iterations: usize, rho: f64 },

    #[error("singular design in {regression} (condition number {condition:.3e})")]
    SingularDesign { regression: String, condition: f64 },

    #[error("transition set diverges: spectral radius {0:.6} exceeds the divergence guard")]
    Divergent(f64),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::Config(_)
                | Error::Dimension(_)
                | Error::Contract(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

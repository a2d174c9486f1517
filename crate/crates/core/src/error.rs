use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QpaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QpaError {
    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("tensor product of dimension {0} exceeds the supported maximum of 16")]
    DimensionOverflow(usize),

    #[error("unsupported Hilbert-space dimension {0}; expected 2, 4 or 16")]
    UnsupportedDimension(usize),

    #[error("matrix is not unitary (max deviation of U^dag U from I is {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not an orthogonal projector (deviation {0:e})")]
    NotProjector(f64),

    #[error("state vector is not normalised (squared norm {0})")]
    NotNormalized(f64),

    #[error("not a density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid Bell weights: {0}")]
    InvalidWeights(String),

    #[error("count record is empty")]
    EmptyCounts,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl QpaError {
    /// True for errors caused by user-supplied configuration rather than by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            QpaError::Config(_)
                | QpaError::ConfigRead { .. }
                | QpaError::ProbabilityOutOfRange { .. }
        )
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(QpaError::ProbabilityOutOfRange { name, value })
    }
}

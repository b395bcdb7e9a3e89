use thiserror::Error;

/// Errors surfaced by the filter, pattern, estimation and calibration layers.
#[derive(Debug, Error)]
pub enum AqqpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical convergence failure: {0}")]
    Convergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("displacement {displacement} outside pattern table range ±{x_max}; rebuild the table with a larger x_max")]
    DisplacementOutOfRange { displacement: f64, x_max: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("calibration inconsistency: {0}")]
    CalibrationInconsistent(String),

    #[error("efficiency {efficiency:.4} below threshold {threshold:.4}; pass an override to convert anyway")]
    EfficiencyBelowThreshold { efficiency: f64, threshold: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, AqqpError>;

use thiserror::Error;

/// Errors raised by the reserving engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("series evaluation lost accuracy: {0}")]
    AccuracyLoss(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("fit did not converge after {iterations} iterations (max change {change:e})")]
    NonConvergence {
        iterations: usize,
        change: f64,
        last: Box<crate::marginal::MarginalModel>,
    },

    #[error("singular matrix in {step}")]
    Singular { step: String },

    #[error("saturated dispersion cell ({i}, {j}): leverage is 1")]
    SaturatedDispersionCell { i: usize, j: usize },

    #[error("degenerate dispersion: {0}")]
    DegenerateDispersion(String),

    #[error("{0}")]
    Estimation(String),

    #[error("empty sample")]
    EmptySample,

    #[error("{0}")]
    Risk(String),

    #[error("scenario file: {0}")]
    ScenarioFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use triangle_risk_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("model file {0} not found; run `triangle-risk fit` first or set models_dir")]
    MissingModel(PathBuf),

    #[error("{}", line_message(line, source))]
    Line { line: String, source: CoreError },
}

fn line_message(line: &str, source: &CoreError) -> String {
    let text = source.to_string();
    if text.contains(line) {
        text
    } else {
        format!("line {line}: {text}")
    }
}

impl CliError {
    /// Stable machine-readable code printed after `ERROR`.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) | CliError::Line { source: e, .. } => core_code(e),
            CliError::Usage(_) => "USAGE",
            CliError::Config(_) => "CONFIG",
            CliError::Read { .. } => "READ",
            CliError::Write { .. } => "WRITE",
            CliError::MissingModel(_) => "MISSING_MODEL",
        }
    }
}

fn core_code(e: &CoreError) -> &'static str {
    match e {
        CoreError::Domain(_) => "DOMAIN",
        CoreError::Config(_) => "CONFIG",
        CoreError::AccuracyLoss(_) => "ACCURACY_LOSS",
        CoreError::Ingestion(_) => "INGESTION",
        CoreError::Schema { .. } => "SCHEMA",
        CoreError::NonConvergence { .. } => "NON_CONVERGENCE",
        CoreError::Singular { .. } => "SINGULAR",
        CoreError::SaturatedDispersionCell { .. } => "SATURATED_DISPERSION",
        CoreError::DegenerateDispersion(_) => "DEGENERATE_DISPERSION",
        CoreError::Estimation(_) => "ESTIMATION",
        CoreError::EmptySample => "EMPTY_SAMPLE",
        CoreError::Risk(_) => "RISK",
        CoreError::ScenarioFormat(_) => "SCENARIO_FORMAT",
        CoreError::Io(_) => "IO",
        CoreError::Json(_) => "JSON",
        CoreError::Csv(_) => "CSV",
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

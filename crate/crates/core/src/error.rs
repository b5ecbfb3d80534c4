use thiserror::Error;

/// Errors produced anywhere in the search engine.
#[derive(Debug, Error)]
pub enum NasError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("choice {choice} at layer {layer} is outside [0, {num_choices})")]
    InvalidChoice {
        layer: usize,
        choice: usize,
        num_choices: usize,
    },

    #[error("genome id {id} out of range for a space of {size} architectures")]
    Range { id: u64, size: u64 },

    #[error("space with {num_choices}^{num_layers} architectures exceeds 64-bit ids")]
    Capacity { num_layers: usize, num_choices: usize },

    #[error("population is empty after exclusion")]
    EmptyPopulation,

    #[error("population needs at least {required} members, has {actual}")]
    InsufficientPopulation { required: usize, actual: usize },

    #[error("constraint infeasible: {0}")]
    InfeasibleConstraint(String),

    #[error("genome id {0} not present in tabular benchmark")]
    UnknownGenome(u64),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NasError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        NasError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        NasError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = NasError> = std::result::Result<T, E>;

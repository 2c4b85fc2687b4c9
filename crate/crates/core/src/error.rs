use thiserror::Error;

use crate::types::LanguageCode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unsupported language code {0}")]
    UnsupportedLanguage(LanguageCode),
    #[error("prompt template: {0}")]
    Template(String),
}

/// Failures of the translation, chat and embedding services.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("{service} backend unavailable{context}: {detail}")]
    Unavailable {
        service: &'static str,
        context: String,
        detail: String,
    },
    #[error("{service} backend configuration: {detail}")]
    Configuration { service: &'static str, detail: String },
    #[error("{service} backend returned an empty response")]
    EmptyResponse { service: &'static str },
    #[error("unexpected {service} response: {detail}")]
    Decode { service: &'static str, detail: String },
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionDrift { expected: usize, got: usize },
}

impl BackendError {
    /// Errors that abort the whole run instead of a single trace.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            BackendError::Configuration { .. } | BackendError::DimensionDrift { .. }
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("no responses available to poll")]
    NoResponses,
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid calibration parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("item {0} has not been judged")]
    Unjudged(String),
    #[error("cannot compute metrics over zero items")]
    EmptyCounts,
    #[error("no results to sweep")]
    EmptyResults,
    #[error("cutoff grid must be strictly increasing within [0, 1]")]
    BadGrid,
    #[error("sweeps do not share the same cutoff grid")]
    GridMismatch,
    #[error("no sweeps to average")]
    NoSweeps,
}

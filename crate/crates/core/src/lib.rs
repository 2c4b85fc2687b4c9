//! Multilingual knowledge abstention for multiple-choice QA.
//!
//! A question is translated into a set of auxiliary languages, a
//! multilingual chat model answers each translation, and the answers are
//! translated back. The consensus answer is chosen by character n-gram
//! centroid polling; its confidence is the boosted mean embedding similarity
//! of the other answers to it. Below a cutoff the system abstains. Runs are
//! scored with abstention-aware metrics and swept over cutoffs.

pub mod backends;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod similarity;
pub mod types;

pub use calibration::{confidence, decide, Confidence, Embedding};
pub use error::{BackendError, CalibrationError, ConfigError, EvalError, PipelineError, SimilarityError};
pub use evaluation::{
    accuracy_coverage_curve, confusion, default_grid, judge, metrics, optimal_cutoff, sweep, MetricSet,
    OptimalCutoff, SweepRow,
};
pub use pipeline::{ItemResult, Pipeline, RunMode};
pub use similarity::{centroid_poll, ngram_vector, NgramVector};
pub use types::{
    validate_dataset, ConfusionCounts, Decision, EvalItem, ItemOutcome, ItemTrace, LanguageCode, LanguageSet,
    RunConfig,
};

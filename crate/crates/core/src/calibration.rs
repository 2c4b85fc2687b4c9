//! Confidence of the polled answer and the abstain/answer decision.
//!
//! Confidence is the mean cosine similarity between the selected answer's
//! sentence embedding and every other answer's embedding, where each
//! similarity above the boost threshold is multiplied by the boost weight.
//! The raw value may exceed 1 and is clamped before use.

use serde::{Deserialize, Serialize};

use crate::error::CalibrationError;
use crate::similarity::cosine_dense;
use crate::types::{clamp_confidence, Decision};

/// Sentence embedding as returned by the embedding backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn cosine(&self, other: &Embedding) -> Result<f64, CalibrationError> {
        if self.dimension() != other.dimension() {
            return Err(CalibrationError::DimensionMismatch {
                expected: self.dimension(),
                got: other.dimension(),
            });
        }
        Ok(cosine_dense(&self.0, &other.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub raw: f64,
    pub clamped: f64,
}

/// Weighted mean similarity of `others` to `selected`.
///
/// The boost applies only when a similarity is strictly greater than
/// `boost_threshold`. With no corroborating answers the confidence is 0.
pub fn confidence(
    selected: &Embedding,
    others: &[Embedding],
    boost_threshold: f64,
    boost_weight: f64,
) -> Result<Confidence, CalibrationError> {
    let similarities = others
        .iter()
        .map(|e| selected.cosine(e))
        .collect::<Result<Vec<_>, _>>()?;
    confidence_from_similarities(&similarities, boost_threshold, boost_weight)
}

pub fn confidence_from_similarities(
    similarities: &[f64],
    boost_threshold: f64,
    boost_weight: f64,
) -> Result<Confidence, CalibrationError> {
    if !(0.0..=1.0).contains(&boost_threshold) {
        return Err(CalibrationError::InvalidParameter(format!(
            "boost threshold {boost_threshold} outside [0, 1]"
        )));
    }
    if !(boost_weight >= 1.0 && boost_weight.is_finite()) {
        return Err(CalibrationError::InvalidParameter(format!(
            "boost weight {boost_weight} below 1"
        )));
    }
    if similarities.is_empty() {
        return Ok(Confidence {
            raw: 0.0,
            clamped: 0.0,
        });
    }
    let weighted: f64 = similarities
        .iter()
        .map(|&s| if s > boost_threshold { boost_weight * s } else { s })
        .sum();
    let raw = weighted / similarities.len() as f64;
    Ok(Confidence {
        raw,
        clamped: clamp_confidence(raw),
    })
}

/// Answer iff `confidence >= cutoff`.
pub fn decide(confidence: f64, cutoff: f64) -> Decision {
    if confidence >= cutoff {
        Decision::Answer
    } else {
        Decision::Abstain
    }
}

//! Character n-gram features, cosine similarity and centroid polling.
//!
//! Polling picks, among the back-translated answers, the one whose n-gram
//! vector has the highest mean cosine similarity to all answers (itself
//! included). Text is NFC-normalized and lowercased before windowing.

use std::collections::BTreeMap;

use unicode_normalization::UnicodeNormalization;

use crate::error::SimilarityError;

/// Scores closer than this are treated as tied during polling.
pub const TIE_EPSILON: f64 = 1e-12;

/// Sparse count vector over character n-grams.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NgramVector {
    entries: BTreeMap<String, u32>,
}

impl NgramVector {
    pub fn entries(&self) -> &BTreeMap<String, u32> {
        &self.entries
    }

    pub fn get(&self, key: &str) -> u32 {
        self.entries.get(key).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| c as u64).sum()
    }

    fn squared_norm(&self) -> f64 {
        self.entries.values().map(|&c| (c as f64) * (c as f64)).sum()
    }

    fn dot(&self, other: &NgramVector) -> f64 {
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .map(|(k, &c)| (c as f64) * (large.get(k) as f64))
            .sum()
    }

    pub fn cosine(&self, other: &NgramVector) -> f64 {
        ratio(self.dot(other), self.squared_norm(), other.squared_norm())
    }
}

impl<K: Into<String>> FromIterator<(K, u32)> for NgramVector {
    fn from_iter<I: IntoIterator<Item = (K, u32)>>(iter: I) -> Self {
        let mut entries = BTreeMap::new();
        for (k, c) in iter {
            if c > 0 {
                *entries.entry(k.into()).or_insert(0) += c;
            }
        }
        NgramVector { entries }
    }
}

pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

/// Counts every length-`n` character window of the normalized text.
///
/// Text shorter than `n` becomes a single feature; blank text yields an empty vector.
pub fn ngram_vector(text: &str, n: usize) -> NgramVector {
    let n = n.max(1);
    let normalized = normalize(text);
    let mut entries = BTreeMap::new();
    if normalized.trim().is_empty() {
        return NgramVector { entries };
    }
    let chars: Vec<char> = normalized.chars().collect();
    if chars.len() < n {
        entries.insert(normalized, 1);
    } else {
        for window in chars.windows(n) {
            *entries.entry(window.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    NgramVector { entries }
}

/// Cosine similarity of dense vectors; 0 when either norm is 0.
pub fn cosine_dense(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|b| b * b).sum();
    ratio(dot, nu, nv)
}

// sqrt(nu * nv) rather than sqrt(nu) * sqrt(nv) so identical vectors give exactly 1.
fn ratio(dot: f64, nu: f64, nv: f64) -> f64 {
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0)
}

/// Mean similarity of each answer to every answer, itself included.
pub fn polling_scores(answers: &[impl AsRef<str>], n: usize) -> Vec<f64> {
    let vectors: Vec<NgramVector> = answers.iter().map(|a| ngram_vector(a.as_ref(), n)).collect();
    let count = vectors.len() as f64;
    vectors
        .iter()
        .map(|vi| vectors.iter().map(|vj| vi.cosine(vj)).sum::<f64>() / count)
        .collect()
}

/// Returns the index and text of the consensus answer. Ties go to the smallest index.
pub fn centroid_poll(
    answers: &[impl AsRef<str>],
    n: usize,
) -> Result<(usize, String), SimilarityError> {
    if answers.is_empty() {
        return Err(SimilarityError::NoResponses);
    }
    let scores = polling_scores(answers, n);
    let mut best = 0;
    for (i, &score) in scores.iter().enumerate().skip(1) {
        if score > scores[best] + TIE_EPSILON {
            best = i;
        }
    }
    Ok((best, answers[best].as_ref().to_string()))
}

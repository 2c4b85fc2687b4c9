//! Domain types shared across the pipeline, backends and evaluation.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// FLORES-200 style language code, e.g. `eng_Latn`, `zho_Hans`.
///
/// Codes are passed to translation backends opaquely; [`LanguageCode::is_flores`]
/// only checks the shape.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl Into<String>) -> Self {
        LanguageCode(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Three lowercase letters, an underscore, then a capitalized four-letter script tag.
    pub fn is_flores(&self) -> bool {
        let Some((lang, script)) = self.0.split_once('_') else {
            return false;
        };
        let mut script_chars = script.chars();
        lang.len() == 3
            && lang.chars().all(|c| c.is_ascii_lowercase())
            && script.len() == 4
            && script_chars.next().is_some_and(|c| c.is_ascii_uppercase())
            && script_chars.all(|c| c.is_ascii_lowercase())
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LanguageCode {
    fn from(s: &str) -> Self {
        LanguageCode::new(s)
    }
}

/// One multiple-choice item. The gold answer is stored as the full choice text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    #[serde(rename = "lang")]
    pub target_language: LanguageCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    NoChoices,
    GoldNotInChoices { gold: String },
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub item_id: String,
    pub issue: ValidationIssue,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.issue {
            ValidationIssue::NoChoices => write!(f, "item {}: choices are empty", self.item_id),
            ValidationIssue::GoldNotInChoices { gold } => write!(
                f,
                "item {}: answer {gold:?} matches no choice verbatim",
                self.item_id
            ),
            ValidationIssue::DuplicateId => write!(f, "item {}: duplicate id", self.item_id),
        }
    }
}

/// Checks every item invariant; an empty result means the dataset is usable.
///
/// A duplicated id is reported once, on its second occurrence.
pub fn validate_dataset(items: &[EvalItem]) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for item in items {
        if item.choices.is_empty() {
            errors.push(ValidationError {
                item_id: item.id.clone(),
                issue: ValidationIssue::NoChoices,
            });
        } else if !item.choices.iter().any(|c| c == &item.gold_answer) {
            errors.push(ValidationError {
                item_id: item.id.clone(),
                issue: ValidationIssue::GoldNotInChoices {
                    gold: item.gold_answer.clone(),
                },
            });
        }
        if !seen.insert(item.id.as_str()) && reported.insert(item.id.as_str()) {
            errors.push(ValidationError {
                item_id: item.id.clone(),
                issue: ValidationIssue::DuplicateId,
            });
        }
    }
    errors
}

/// Named, ordered group of auxiliary languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSet {
    pub name: String,
    pub languages: Vec<LanguageCode>,
}

impl LanguageSet {
    pub fn new(name: impl Into<String>, languages: Vec<LanguageCode>) -> Result<Self, ConfigError> {
        let set = LanguageSet {
            name: name.into(),
            languages,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.languages.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "language set {:?} is empty",
                self.name
            )));
        }
        let mut seen = BTreeSet::new();
        for code in &self.languages {
            if !code.is_flores() {
                return Err(ConfigError::UnsupportedLanguage(code.clone()));
            }
            if !seen.insert(code) {
                return Err(ConfigError::Invalid(format!(
                    "language set {:?} lists {code} twice",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.languages.contains(code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStage {
    TranslateQuestion,
    TranslateChoices,
    Chat,
    Extract,
    BackTranslate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFailure {
    pub stage: TraceStage,
    pub message: String,
}

/// Everything that happened for one auxiliary language of one item.
///
/// Fields after the failing stage are left empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemTrace {
    pub language: LanguageCode,
    pub translated_question: String,
    pub translated_choices: Vec<String>,
    pub prompt: String,
    pub raw_generation: String,
    pub extracted_answer: String,
    pub back_translated_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<TraceFailure>,
}

impl ItemTrace {
    pub fn new(language: LanguageCode) -> Self {
        ItemTrace {
            language,
            ..Default::default()
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Answer,
    Abstain,
}

impl Decision {
    pub fn abstained(self) -> bool {
        self == Decision::Abstain
    }
}

/// The per-item verdict: the polled answer, its confidence, and what to do with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    /// Index into the successful traces of the item.
    pub selected_index: Option<usize>,
    pub selected_answer: Option<String>,
    pub confidence_raw: f64,
    pub confidence: f64,
    pub decision: Decision,
    pub judged_correct: Option<bool>,
    /// Set when no trace produced a usable answer, or scoring the answers failed.
    #[serde(default)]
    pub failed: bool,
}

impl ItemOutcome {
    pub fn selected(index: usize, answer: String, confidence_raw: f64, cutoff: f64) -> Self {
        let confidence = clamp_confidence(confidence_raw);
        ItemOutcome {
            selected_index: Some(index),
            selected_answer: Some(answer),
            confidence_raw,
            confidence,
            decision: crate::calibration::decide(confidence, cutoff),
            judged_correct: None,
            failed: false,
        }
    }

    /// Forced abstention with zero confidence.
    pub fn failure() -> Self {
        ItemOutcome {
            selected_index: None,
            selected_answer: None,
            confidence_raw: 0.0,
            confidence: 0.0,
            decision: Decision::Abstain,
            judged_correct: None,
            failed: true,
        }
    }
}

/// `min(max(raw, 0), 1)`; NaN maps to 0.
pub fn clamp_confidence(raw: f64) -> f64 {
    if raw.is_nan() {
        0.0
    } else {
        raw.clamp(0.0, 1.0)
    }
}

/// Abstain/answer by correct/incorrect tallies.
///
/// `a1`: abstained on a correct answer, `a2`: abstained on an incorrect one,
/// `a3`: answered correctly, `a4`: answered incorrectly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub a1: u64,
    pub a2: u64,
    pub a3: u64,
    pub a4: u64,
    pub total: u64,
}

impl ConfusionCounts {
    pub fn new(a1: u64, a2: u64, a3: u64, a4: u64) -> Self {
        ConfusionCounts {
            a1,
            a2,
            a3,
            a4,
            total: a1 + a2 + a3 + a4,
        }
    }

    pub fn record(&mut self, decision: Decision, correct: bool) {
        match (decision, correct) {
            (Decision::Abstain, true) => self.a1 += 1,
            (Decision::Abstain, false) => self.a2 += 1,
            (Decision::Answer, true) => self.a3 += 1,
            (Decision::Answer, false) => self.a4 += 1,
        }
        self.total += 1;
    }

    pub fn abstained(&self) -> u64 {
        self.a1 + self.a2
    }

    pub fn answered(&self) -> u64 {
        self.a3 + self.a4
    }

    pub fn is_consistent(&self) -> bool {
        self.a1 + self.a2 + self.a3 + self.a4 == self.total
    }
}

pub const DEFAULT_BOOST_THRESHOLD: f64 = 0.8;
pub const DEFAULT_BOOST_WEIGHT: f64 = 1.5;
pub const DEFAULT_JUDGE_THRESHOLD: f64 = 0.85;
pub const DEFAULT_NGRAM_SIZE: usize = 3;
pub const DEFAULT_SEED: u64 = 97;
pub const DEFAULT_SAMPLE_SIZE: usize = 200;

/// Numerical and sampling parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub target_language: LanguageCode,
    pub auxiliary_set: LanguageSet,
    pub cutoff: f64,
    pub similarity_boost_threshold: f64,
    pub boost_weight: f64,
    pub judge_threshold: f64,
    pub ngram_size: usize,
    pub seed: u64,
    pub sample_size: usize,
    /// Maximum items in flight at once.
    pub item_concurrency: usize,
}

impl RunConfig {
    pub fn new(target_language: LanguageCode, auxiliary_set: LanguageSet, cutoff: f64) -> Self {
        RunConfig {
            target_language,
            auxiliary_set,
            cutoff,
            similarity_boost_threshold: DEFAULT_BOOST_THRESHOLD,
            boost_weight: DEFAULT_BOOST_WEIGHT,
            judge_threshold: DEFAULT_JUDGE_THRESHOLD,
            ngram_size: DEFAULT_NGRAM_SIZE,
            seed: DEFAULT_SEED,
            sample_size: DEFAULT_SAMPLE_SIZE,
            item_concurrency: 4,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("cutoff", self.cutoff)?;
        unit("similarity_boost_threshold", self.similarity_boost_threshold)?;
        unit("judge_threshold", self.judge_threshold)?;
        if !(self.boost_weight >= 1.0 && self.boost_weight.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "boost_weight must be >= 1, got {}",
                self.boost_weight
            )));
        }
        if self.ngram_size == 0 {
            return Err(ConfigError::Invalid("ngram_size must be positive".into()));
        }
        if self.sample_size == 0 {
            return Err(ConfigError::Invalid("sample_size must be positive".into()));
        }
        if self.item_concurrency == 0 {
            return Err(ConfigError::Invalid("item concurrency must be positive".into()));
        }
        if !self.target_language.is_flores() {
            return Err(ConfigError::UnsupportedLanguage(self.target_language.clone()));
        }
        self.auxiliary_set.validate()
    }
}

//! Human-readable per-item trace, one JSON line per item, laid out stage by stage.

use serde::{Deserialize, Serialize};

use super::ItemResult;
use crate::types::{Decision, LanguageCode, TraceFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: String,
    pub original: Original,
    pub translated_prompts: Vec<TranslatedPrompt>,
    pub responses: Vec<Response>,
    pub back_translations: Vec<BackTranslation>,
    pub decision: FinalDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Original {
    pub language: LanguageCode,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedPrompt {
    pub language: LanguageCode,
    pub question: String,
    pub choices: Vec<String>,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub language: LanguageCode,
    pub raw: String,
    pub extracted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<TraceFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackTranslation {
    pub language: LanguageCode,
    pub text: String,
    pub selected: bool,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDecision {
    pub answer: Option<String>,
    pub confidence: f64,
    pub confidence_raw: f64,
    pub decision: Decision,
    pub similarity_with_gold: Option<f64>,
    pub correct: Option<bool>,
    pub failed: bool,
}

impl From<&ItemResult> for AuditRecord {
    fn from(r: &ItemResult) -> Self {
        let selected_language = r.selected_trace().map(|t| t.language.clone());
        AuditRecord {
            id: r.item.id.clone(),
            original: Original {
                language: r.item.target_language.clone(),
                question: r.item.question.clone(),
                choices: r.item.choices.clone(),
                answer: r.item.gold_answer.clone(),
            },
            translated_prompts: r
                .traces
                .iter()
                .filter(|t| !t.prompt.is_empty())
                .map(|t| TranslatedPrompt {
                    language: t.language.clone(),
                    question: t.translated_question.clone(),
                    choices: t.translated_choices.clone(),
                    prompt: t.prompt.clone(),
                })
                .collect(),
            responses: r
                .traces
                .iter()
                .map(|t| Response {
                    language: t.language.clone(),
                    raw: t.raw_generation.clone(),
                    extracted: t.extracted_answer.clone(),
                    failure: t.failure.clone(),
                })
                .collect(),
            back_translations: r
                .traces
                .iter()
                .zip(&r.similarities)
                .filter(|(t, _)| t.succeeded())
                .map(|(t, s)| BackTranslation {
                    language: t.language.clone(),
                    text: t.back_translated_answer.clone(),
                    selected: selected_language.as_ref() == Some(&t.language),
                    similarity: *s,
                })
                .collect(),
            decision: FinalDecision {
                answer: r.outcome.selected_answer.clone(),
                confidence: r.outcome.confidence,
                confidence_raw: r.outcome.confidence_raw,
                decision: r.outcome.decision,
                similarity_with_gold: r.judge_similarity,
                correct: r.outcome.judged_correct,
                failed: r.outcome.failed,
            },
        }
    }
}

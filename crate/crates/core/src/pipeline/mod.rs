//! Per-item orchestration.
//!
//! For every auxiliary language the question and choices are translated out
//! of the target language, the filled prompt is sent to the chat model, the
//! bare answer is extracted and translated back. The back-translated answers
//! are polled for a consensus, the consensus answer's confidence is computed
//! from sentence embeddings, and the item is answered or abstained on.
//! Baseline mode prompts once in the target language and always answers.

pub mod audit;
pub mod extract;
pub mod prompt;

use std::collections::HashMap;
use std::sync::Arc;

use futures::future::join_all;
use futures::stream::{self, StreamExt, TryStreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::calibration::{confidence, Embedding};
use crate::error::{BackendError, PipelineError};
use crate::similarity::centroid_poll;
use crate::types::{
    Decision, EvalItem, ItemOutcome, ItemTrace, LanguageCode, RunConfig, TraceFailure, TraceStage,
};

pub use extract::extract_answer;
pub use prompt::{build_prompt, PromptTemplate, PromptTemplates};

/// Joins the choices of one item into a single translation payload.
pub const CHOICE_SEPARATOR: &str = "\n|||\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Mka,
    Baseline,
}

impl std::str::FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mka" => Ok(RunMode::Mka),
            "baseline" => Ok(RunMode::Baseline),
            other => Err(format!("unknown mode {other:?}; expected mka or baseline")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item: EvalItem,
    pub mode: RunMode,
    /// One per auxiliary language, in configuration order.
    pub traces: Vec<ItemTrace>,
    /// Embedding similarity of each trace's answer to the selected answer;
    /// absent for the selected trace itself and for failed traces.
    #[serde(default)]
    pub similarities: Vec<Option<f64>>,
    pub outcome: ItemOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_error: Option<String>,
}

impl ItemResult {
    pub fn successful_traces(&self) -> impl Iterator<Item = &ItemTrace> {
        self.traces.iter().filter(|t| t.succeeded())
    }

    /// The trace holding the selected answer.
    pub fn selected_trace(&self) -> Option<&ItemTrace> {
        self.outcome
            .selected_index
            .and_then(|i| self.successful_traces().nth(i))
    }
}

/// A configured pipeline: run parameters, prompt templates and services.
pub struct Pipeline {
    config: RunConfig,
    templates: PromptTemplates,
    backends: Arc<Backends>,
}

fn fail(trace: &mut ItemTrace, stage: TraceStage, error: &BackendError) {
    trace.failure = Some(TraceFailure {
        stage,
        message: error.to_string(),
    });
}

impl Pipeline {
    pub fn new(config: RunConfig, templates: PromptTemplates, backends: Arc<Backends>) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Pipeline {
            config,
            templates,
            backends,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    /// Translates all choices in one request, falling back to one request per
    /// choice when the separator does not survive translation.
    async fn translate_choices(
        &self,
        choices: &[String],
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<Vec<String>, BackendError> {
        if choices.len() > 1 {
            let joined = choices.join(CHOICE_SEPARATOR);
            let translated = self.backends.translate(&joined, source, target).await?;
            let parts: Vec<String> = translated
                .split(CHOICE_SEPARATOR.trim())
                .map(|p| p.trim().to_string())
                .collect();
            if parts.len() == choices.len() && parts.iter().all(|p| !p.is_empty()) {
                return Ok(parts);
            }
            tracing::debug!(%target, "choice separator lost in translation; translating choices one by one");
        }
        let mut out = Vec::with_capacity(choices.len());
        for choice in choices {
            out.push(self.backends.translate(choice, source, target).await?);
        }
        Ok(out)
    }

    /// Runs one auxiliary language. Fatal backend errors are returned; all
    /// others are recorded on the trace.
    async fn run_language(&self, item: &EvalItem, language: &LanguageCode) -> Result<ItemTrace, PipelineError> {
        let target = &item.target_language;
        let mut trace = ItemTrace::new(language.clone());

        macro_rules! step {
            ($stage:expr, $call:expr) => {
                match $call.await {
                    Ok(v) => v,
                    Err(e) if e.is_fatal() => return Err(e.into()),
                    Err(e) => {
                        fail(&mut trace, $stage, &e);
                        return Ok(trace);
                    }
                }
            };
        }

        trace.translated_question = step!(
            TraceStage::TranslateQuestion,
            self.backends.translate(&item.question, target, language)
        );
        trace.translated_choices = step!(
            TraceStage::TranslateChoices,
            self.translate_choices(&item.choices, target, language)
        );
        let template = self.templates.for_language(language);
        trace.prompt = build_prompt(&trace.translated_question, &trace.translated_choices, template)?;
        trace.raw_generation = step!(TraceStage::Chat, self.backends.chat(&trace.prompt));
        trace.extracted_answer = extract_answer(&trace.raw_generation);
        if trace.extracted_answer.is_empty() {
            trace.failure = Some(TraceFailure {
                stage: TraceStage::Extract,
                message: "no answer text in generation".into(),
            });
            return Ok(trace);
        }
        trace.back_translated_answer = step!(
            TraceStage::BackTranslate,
            self.backends.translate(&trace.extracted_answer, language, target)
        );
        Ok(trace)
    }

    /// Embeds each distinct text once.
    async fn embed_all(&self, texts: &[&str]) -> Result<Vec<Embedding>, BackendError> {
        let mut cache: HashMap<&str, Embedding> = HashMap::new();
        let mut out = Vec::with_capacity(texts.len());
        for &text in texts {
            if let Some(e) = cache.get(text) {
                out.push(e.clone());
                continue;
            }
            let e = self.backends.embed(text).await?;
            cache.insert(text, e.clone());
            out.push(e);
        }
        Ok(out)
    }

    pub async fn run_item(&self, item: &EvalItem) -> Result<ItemResult, PipelineError> {
        let languages = &self.config.auxiliary_set.languages;
        let traces = join_all(languages.iter().map(|l| self.run_language(item, l)))
            .await
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;

        let successful: Vec<(usize, &str)> = traces
            .iter()
            .enumerate()
            .filter(|(_, t)| t.succeeded())
            .map(|(i, t)| (i, t.back_translated_answer.as_str()))
            .collect();
        let mut similarities = vec![None; traces.len()];
        let answers: Vec<&str> = successful.iter().map(|&(_, a)| a).collect();

        let outcome = match centroid_poll(&answers, self.config.ngram_size) {
            Err(_) => ItemOutcome::failure(),
            Ok((selected, answer)) => match self.embed_all(&answers).await {
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    tracing::warn!(item = %item.id, error = %e, "embedding failed; abstaining");
                    ItemOutcome {
                        selected_index: Some(selected),
                        selected_answer: Some(answer),
                        ..ItemOutcome::failure()
                    }
                }
                Ok(embeddings) => {
                    let others: Vec<Embedding> = embeddings
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != selected)
                        .map(|(_, e)| e.clone())
                        .collect();
                    for (k, &(trace_index, _)) in successful.iter().enumerate() {
                        if k != selected {
                            similarities[trace_index] = embeddings[selected].cosine(&embeddings[k]).ok();
                        }
                    }
                    let conf = confidence(
                        &embeddings[selected],
                        &others,
                        self.config.similarity_boost_threshold,
                        self.config.boost_weight,
                    )
                    .map_err(|e| BackendError::Configuration {
                        service: "embedding",
                        detail: e.to_string(),
                    })?;
                    ItemOutcome::selected(selected, answer, conf.raw, self.config.cutoff)
                }
            },
        };

        Ok(ItemResult {
            item: item.clone(),
            mode: RunMode::Mka,
            traces,
            similarities,
            outcome,
            judge_similarity: None,
            judge_error: None,
        })
    }

    /// One prompt in the target language, no translation, always answers.
    pub async fn run_baseline(&self, item: &EvalItem) -> Result<ItemResult, PipelineError> {
        let language = &item.target_language;
        let mut trace = ItemTrace::new(language.clone());
        trace.translated_question = item.question.clone();
        trace.translated_choices = item.choices.clone();
        trace.prompt = build_prompt(&item.question, &item.choices, self.templates.for_language(language))?;
        match self.backends.chat(&trace.prompt).await {
            Ok(generation) => {
                trace.raw_generation = generation;
                trace.extracted_answer = extract_answer(&trace.raw_generation);
                trace.back_translated_answer = trace.extracted_answer.clone();
                if trace.extracted_answer.is_empty() {
                    trace.failure = Some(TraceFailure {
                        stage: TraceStage::Extract,
                        message: "no answer text in generation".into(),
                    });
                }
            }
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => fail(&mut trace, TraceStage::Chat, &e),
        }
        let outcome = if trace.succeeded() {
            ItemOutcome {
                selected_index: Some(0),
                selected_answer: Some(trace.back_translated_answer.clone()),
                confidence_raw: 1.0,
                confidence: 1.0,
                decision: Decision::Answer,
                judged_correct: None,
                failed: false,
            }
        } else {
            ItemOutcome {
                confidence_raw: 1.0,
                confidence: 1.0,
                decision: Decision::Answer,
                ..ItemOutcome::failure()
            }
        };
        Ok(ItemResult {
            item: item.clone(),
            mode: RunMode::Baseline,
            traces: vec![trace],
            similarities: vec![None],
            outcome,
            judge_similarity: None,
            judge_error: None,
        })
    }

    /// Runs every item (after seeded sampling down to `sample_size`), up to
    /// `item_concurrency` at a time. Results keep the input order.
    pub async fn run_set(&self, items: &[EvalItem], mode: RunMode) -> Result<Vec<ItemResult>, PipelineError> {
        let sampled = sample_items(items, self.config.sample_size, self.config.seed);
        stream::iter(sampled.into_iter().map(|item| async move {
            match mode {
                RunMode::Mka => self.run_item(item).await,
                RunMode::Baseline => self.run_baseline(item).await,
            }
        }))
        .buffered(self.config.item_concurrency)
        .try_collect()
        .await
    }
}

/// Selects `size` items with a seeded RNG, preserving input order. Returns
/// every item when there are no more than `size`.
pub fn sample_items(items: &[EvalItem], size: usize, seed: u64) -> Vec<&EvalItem> {
    if items.len() <= size {
        return items.iter().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), size).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &items[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<EvalItem> {
        (0..n)
            .map(|i| EvalItem {
                id: format!("i{i}"),
                question: format!("q{i}"),
                choices: vec!["a".into(), "b".into()],
                gold_answer: "a".into(),
                target_language: "eng_Latn".into(),
            })
            .collect()
    }

    #[test]
    fn sampling_is_seeded_and_ordered() {
        let all = items(1000);
        let a: Vec<&str> = sample_items(&all, 200, 97).iter().map(|i| i.id.as_str()).collect();
        let b: Vec<&str> = sample_items(&all, 200, 97).iter().map(|i| i.id.as_str()).collect();
        let c: Vec<&str> = sample_items(&all, 200, 98).iter().map(|i| i.id.as_str()).collect();
        assert_eq!(a.len(), 200);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let positions: Vec<usize> = a.iter().map(|id| id[1..].parse().unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_sets_are_not_sampled() {
        assert_eq!(sample_items(&items(3), 200, 97).len(), 3);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("mka".parse::<RunMode>(), Ok(RunMode::Mka));
        assert!("other".parse::<RunMode>().is_err());
    }
}

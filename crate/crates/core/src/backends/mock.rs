//! Deterministic in-process backends for tests, fixtures and dry runs.
//!
//! Every mock is a pure function of its construction arguments, so runs over
//! mocks are bit-reproducible regardless of request order.

use std::collections::HashMap;

use async_trait::async_trait;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::{ChatModel, Embedder, Translator};
use crate::calibration::Embedding;
use crate::error::BackendError;
use crate::pipeline::CHOICE_SEPARATOR;
use crate::similarity::ngram_vector;
use crate::types::{EvalItem, LanguageCode};

fn stable_hash(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Returns the input unchanged, but still counts as a backend request.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

#[async_trait]
impl Translator for IdentityTranslator {
    fn model_name(&self) -> &str {
        "identity"
    }

    async fn translate(&self, text: &str, _: &LanguageCode, _: &LanguageCode) -> Result<String, BackendError> {
        Ok(text.to_string())
    }
}

/// Marks text translated away from a home language with a `⟦code⟧` suffix,
/// and strips every such mark when translating back home.
#[derive(Debug, Clone)]
pub struct TagTranslator {
    home: LanguageCode,
    tag: Regex,
}

impl TagTranslator {
    pub fn new(home: LanguageCode) -> Self {
        TagTranslator {
            home,
            tag: Regex::new(r" ?⟦[^⟧]*⟧").expect("static regex"),
        }
    }

    pub fn strip(&self, text: &str) -> String {
        self.tag.replace_all(text, "").into_owned()
    }
}

#[async_trait]
impl Translator for TagTranslator {
    fn model_name(&self) -> &str {
        "tag"
    }

    async fn translate(&self, text: &str, _: &LanguageCode, target: &LanguageCode) -> Result<String, BackendError> {
        let clean = self.strip(text);
        if *target == self.home {
            return Ok(clean);
        }
        let tagged = clean
            .split(CHOICE_SEPARATOR)
            .map(|segment| format!("{segment} ⟦{target}⟧"))
            .collect::<Vec<_>>()
            .join(CHOICE_SEPARATOR);
        Ok(tagged)
    }
}

/// What [`TableTranslator`] does with text it has no entry for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unlisted {
    Identity,
    Fail,
}

/// Looks translations up by `(text, target)`.
///
/// Payloads joined with [`CHOICE_SEPARATOR`] that have no entry of their own
/// are translated segment by segment, mimicking a service that preserves the
/// separator.
#[derive(Debug, Clone)]
pub struct TableTranslator {
    entries: HashMap<(String, LanguageCode), String>,
    unlisted: Unlisted,
}

impl TableTranslator {
    pub fn new(unlisted: Unlisted) -> Self {
        TableTranslator {
            entries: HashMap::new(),
            unlisted,
        }
    }

    pub fn entry(mut self, text: &str, target: &str, translation: &str) -> Self {
        self.entries
            .insert((text.to_string(), LanguageCode::from(target)), translation.to_string());
        self
    }

    fn lookup(&self, text: &str, target: &LanguageCode) -> Result<String, BackendError> {
        if let Some(hit) = self.entries.get(&(text.to_string(), target.clone())) {
            return Ok(hit.clone());
        }
        match self.unlisted {
            Unlisted::Identity => Ok(text.to_string()),
            Unlisted::Fail => Err(BackendError::Unavailable {
                service: "translation",
                context: format!(" for ->{target}"),
                detail: format!("no table entry for {text:?}"),
            }),
        }
    }
}

#[async_trait]
impl Translator for TableTranslator {
    fn model_name(&self) -> &str {
        "table"
    }

    async fn translate(&self, text: &str, _: &LanguageCode, target: &LanguageCode) -> Result<String, BackendError> {
        if !self.entries.contains_key(&(text.to_string(), target.clone())) && text.contains(CHOICE_SEPARATOR) {
            let parts = text
                .split(CHOICE_SEPARATOR)
                .map(|segment| self.lookup(segment, target))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(parts.join(CHOICE_SEPARATOR));
        }
        self.lookup(text, target)
    }
}

/// Answers with the response of the first rule whose needle occurs in the prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChat {
    rules: Vec<(String, String)>,
    default: Option<String>,
}

impl ScriptedChat {
    pub fn new(rules: Vec<(String, String)>, default: Option<String>) -> Self {
        ScriptedChat { rules, default }
    }

    pub fn rule(mut self, needle: &str, response: &str) -> Self {
        self.rules.push((needle.to_string(), response.to_string()));
        self
    }

    /// Replies with the gold answer of whichever item's question appears in the prompt.
    pub fn gold_echo(items: &[EvalItem]) -> Self {
        let mut items: Vec<&EvalItem> = items.iter().collect();
        // Longest question first so that a question contained in another cannot shadow it.
        items.sort_by_key(|i| std::cmp::Reverse(i.question.len()));
        ScriptedChat {
            rules: items
                .into_iter()
                .map(|i| (i.question.clone(), i.gold_answer.clone()))
                .collect(),
            default: None,
        }
    }
}

#[async_trait]
impl ChatModel for ScriptedChat {
    fn model_name(&self) -> &str {
        "scripted"
    }

    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        self.rules
            .iter()
            .find(|(needle, _)| prompt.contains(needle.as_str()))
            .map(|(_, r)| r.clone())
            .or_else(|| self.default.clone())
            .ok_or_else(|| BackendError::Unavailable {
                service: "chat",
                context: String::new(),
                detail: "no scripted response matches the prompt".into(),
            })
    }
}

/// Returns the text of the option enumerated as `A.` in the prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoFirstChoice;

#[async_trait]
impl ChatModel for EchoFirstChoice {
    fn model_name(&self) -> &str {
        "echo-first-choice"
    }

    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        prompt
            .lines()
            .find_map(|l| l.trim_start().strip_prefix("A. "))
            .map(|s| s.trim().to_string())
            .ok_or_else(|| BackendError::Decode {
                service: "chat",
                detail: "prompt enumerates no options".into(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct ConstantChat(pub String);

#[async_trait]
impl ChatModel for ConstantChat {
    fn model_name(&self) -> &str {
        "constant"
    }

    async fn chat(&self, _prompt: &str) -> Result<String, BackendError> {
        Ok(self.0.clone())
    }
}

/// A simulated model that knows the gold answers and gets each prompt right
/// with probability `accuracy`, decided by a hash of the prompt.
///
/// Replies are formatted `X) text` so that answer extraction is exercised.
#[derive(Debug, Clone)]
pub struct NoisyOracleChat {
    items: Vec<EvalItem>,
    accuracy: f64,
}

impl NoisyOracleChat {
    pub fn new(items: &[EvalItem], accuracy: f64) -> Self {
        let mut items = items.to_vec();
        items.sort_by_key(|i| std::cmp::Reverse(i.question.len()));
        NoisyOracleChat {
            items,
            accuracy: accuracy.clamp(0.0, 1.0),
        }
    }
}

#[async_trait]
impl ChatModel for NoisyOracleChat {
    fn model_name(&self) -> &str {
        "noisy-oracle"
    }

    fn fingerprint(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.model_name(), "accuracy": self.accuracy })
    }

    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        let item = self
            .items
            .iter()
            .find(|i| prompt.contains(i.question.as_str()))
            .ok_or_else(|| BackendError::Unavailable {
                service: "chat",
                context: String::new(),
                detail: "prompt matches no known question".into(),
            })?;
        let h = stable_hash(&[prompt]);
        let roll = (h % 10_000) as f64 / 10_000.0;
        let gold = item.choices.iter().position(|c| c == &item.gold_answer).unwrap_or(0);
        let pick = if roll < self.accuracy || item.choices.len() < 2 {
            gold
        } else {
            let offset = 1 + ((h >> 20) as usize % (item.choices.len() - 1));
            (gold + offset) % item.choices.len()
        };
        let letter = (b'A' + (pick % 26) as u8) as char;
        Ok(format!("{letter}) {}", item.choices[pick]))
    }
}

/// Fails every request with a transport-style error.
#[derive(Debug, Clone)]
pub struct Failing {
    name: String,
}

impl Failing {
    pub fn new(name: impl Into<String>) -> Self {
        Failing { name: name.into() }
    }

    fn error(&self, service: &'static str) -> BackendError {
        BackendError::Unavailable {
            service,
            context: String::new(),
            detail: format!("{} is down", self.name),
        }
    }
}

#[async_trait]
impl Translator for Failing {
    fn model_name(&self) -> &str {
        &self.name
    }
    async fn translate(&self, _: &str, _: &LanguageCode, _: &LanguageCode) -> Result<String, BackendError> {
        Err(self.error("translation"))
    }
}

#[async_trait]
impl ChatModel for Failing {
    fn model_name(&self) -> &str {
        &self.name
    }
    async fn chat(&self, _: &str) -> Result<String, BackendError> {
        Err(self.error("chat"))
    }
}

#[async_trait]
impl Embedder for Failing {
    fn model_name(&self) -> &str {
        &self.name
    }
    async fn embed(&self, _: &str) -> Result<Embedding, BackendError> {
        Err(self.error("embedding"))
    }
}

/// One basis vector per vocabulary entry: distinct strings are orthogonal.
#[derive(Debug, Clone)]
pub struct OrthogonalEmbedder {
    vocab: Vec<String>,
}

impl OrthogonalEmbedder {
    pub fn new<S: Into<String>>(vocab: impl IntoIterator<Item = S>) -> Self {
        OrthogonalEmbedder {
            vocab: vocab.into_iter().map(Into::into).collect(),
        }
    }
}

#[async_trait]
impl Embedder for OrthogonalEmbedder {
    fn model_name(&self) -> &str {
        "orthogonal"
    }

    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let index = self.vocab.iter().position(|v| v == text).ok_or_else(|| BackendError::Decode {
            service: "embedding",
            detail: format!("{text:?} is not in the fixture vocabulary"),
        })?;
        let mut values = vec![0.0; self.vocab.len()];
        values[index] = 1.0;
        Ok(Embedding::new(values))
    }
}

/// Replays a table of cosine similarities to one anchor text.
///
/// The anchor embeds as the first basis vector; a listed text with similarity
/// `s` embeds as `s·e0 + √(1−s²)·e_k` with its own axis `k`. The anchor text
/// itself, and unlisted texts, are errors unless listed.
#[derive(Debug, Clone)]
pub struct SimilarityTableEmbedder {
    anchor: String,
    table: Vec<(String, f64)>,
}

impl SimilarityTableEmbedder {
    pub fn new(anchor: &str, table: &[(&str, f64)]) -> Self {
        SimilarityTableEmbedder {
            anchor: anchor.to_string(),
            table: table.iter().map(|&(t, s)| (t.to_string(), s)).collect(),
        }
    }
}

#[async_trait]
impl Embedder for SimilarityTableEmbedder {
    fn model_name(&self) -> &str {
        "similarity-table"
    }

    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let dim = self.table.len() + 1;
        let mut values = vec![0.0; dim];
        if text == self.anchor {
            values[0] = 1.0;
            return Ok(Embedding::new(values));
        }
        let (axis, sim) = self
            .table
            .iter()
            .enumerate()
            .find(|(_, (t, _))| t == text)
            .map(|(i, (_, s))| (i + 1, *s))
            .ok_or_else(|| BackendError::Decode {
                service: "embedding",
                detail: format!("{text:?} is not in the similarity table"),
            })?;
        values[0] = sim;
        values[axis] = (1.0 - sim * sim).max(0.0).sqrt();
        Ok(Embedding::new(values))
    }
}

/// Feature-hashed character n-gram counts: an offline stand-in for a sentence encoder.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dimension: usize,
    n: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize, n: usize) -> Self {
        HashingEmbedder {
            dimension: dimension.max(1),
            n: n.max(1),
        }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(256, 3)
    }
}

#[async_trait]
impl Embedder for HashingEmbedder {
    fn model_name(&self) -> &str {
        "hashing"
    }

    fn fingerprint(&self) -> serde_json::Value {
        serde_json::json!({ "model": "hashing", "dimension": self.dimension, "n": self.n })
    }

    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let mut values = vec![0.0; self.dimension];
        for (gram, count) in ngram_vector(text, self.n).entries() {
            let bucket = (stable_hash(&[gram]) % self.dimension as u64) as usize;
            values[bucket] += *count as f64;
        }
        Ok(Embedding::new(values))
    }
}

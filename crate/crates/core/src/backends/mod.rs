//! Translation, chat and embedding services.
//!
//! Each service is a trait so that HTTP clients, the record/replay cache and
//! the deterministic mocks compose freely. The pipeline talks to them through
//! [`Backends`], which applies the shared request contracts: identity
//! translations never leave the process, empty generations are errors,
//! embedding dimensions stay fixed for the whole run, and each service has a
//! bound on in-flight requests.

pub mod cache;
pub mod http;
pub mod mock;
pub mod retry;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::calibration::Embedding;
use crate::error::BackendError;
use crate::types::LanguageCode;

pub use cache::{with_cache, CacheKey, CacheStore, Cached};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Translation,
    Chat,
    Embedding,
}

impl ServiceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Translation => "translation",
            ServiceKind::Chat => "chat",
            ServiceKind::Embedding => "embedding",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[async_trait]
pub trait Translator: Send + Sync {
    fn model_name(&self) -> &str;

    /// Request parameters that change the output besides the input text.
    fn fingerprint(&self) -> Value {
        json!({ "model": self.model_name() })
    }

    fn supports(&self, _code: &LanguageCode) -> bool {
        true
    }

    async fn translate(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, BackendError>;
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    fn model_name(&self) -> &str;

    fn fingerprint(&self) -> Value {
        json!({ "model": self.model_name() })
    }

    async fn chat(&self, prompt: &str) -> Result<String, BackendError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    fn fingerprint(&self) -> Value {
        json!({ "model": self.model_name() })
    }

    async fn embed(&self, text: &str) -> Result<Embedding, BackendError>;
}

#[async_trait]
impl<T: Translator + ?Sized> Translator for Arc<T> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }
    fn fingerprint(&self) -> Value {
        (**self).fingerprint()
    }
    fn supports(&self, code: &LanguageCode) -> bool {
        (**self).supports(code)
    }
    async fn translate(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, BackendError> {
        (**self).translate(text, source, target).await
    }
}

#[async_trait]
impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }
    fn fingerprint(&self) -> Value {
        (**self).fingerprint()
    }
    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).chat(prompt).await
    }
}

#[async_trait]
impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }
    fn fingerprint(&self) -> Value {
        (**self).fingerprint()
    }
    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        (**self).embed(text).await
    }
}

/// Wraps any backend and counts the requests that reach it.
#[derive(Debug)]
pub struct Counted<B> {
    inner: B,
    calls: Arc<AtomicUsize>,
}

impl<B> Counted<B> {
    pub fn new(inner: B) -> Self {
        Counted {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Shared handle to the counter, usable after the backend is moved into [`Backends`].
    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn hit(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl<B: Translator> Translator for Counted<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn fingerprint(&self) -> Value {
        self.inner.fingerprint()
    }
    fn supports(&self, code: &LanguageCode) -> bool {
        self.inner.supports(code)
    }
    async fn translate(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, BackendError> {
        self.hit();
        self.inner.translate(text, source, target).await
    }
}

#[async_trait]
impl<B: ChatModel> ChatModel for Counted<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn fingerprint(&self) -> Value {
        self.inner.fingerprint()
    }
    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        self.hit();
        self.inner.chat(prompt).await
    }
}

#[async_trait]
impl<B: Embedder> Embedder for Counted<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn fingerprint(&self) -> Value {
        self.inner.fingerprint()
    }
    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        self.hit();
        self.inner.embed(text).await
    }
}

/// Maximum in-flight requests per service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcurrencyLimits {
    pub translation: usize,
    pub chat: usize,
    pub embedding: usize,
}

impl Default for ConcurrencyLimits {
    fn default() -> Self {
        ConcurrencyLimits {
            translation: 8,
            chat: 8,
            embedding: 8,
        }
    }
}

/// The three services used by a run, behind the shared request contracts.
pub struct Backends {
    translator: Arc<dyn Translator>,
    chat: Arc<dyn ChatModel>,
    embedder: Arc<dyn Embedder>,
    translation_slots: Semaphore,
    chat_slots: Semaphore,
    embedding_slots: Semaphore,
    dimension: OnceLock<usize>,
}

impl Backends {
    pub fn new(
        translator: impl Translator + 'static,
        chat: impl ChatModel + 'static,
        embedder: impl Embedder + 'static,
    ) -> Self {
        Self::with_limits(translator, chat, embedder, ConcurrencyLimits::default())
    }

    pub fn with_limits(
        translator: impl Translator + 'static,
        chat: impl ChatModel + 'static,
        embedder: impl Embedder + 'static,
        limits: ConcurrencyLimits,
    ) -> Self {
        Backends {
            translator: Arc::new(translator),
            chat: Arc::new(chat),
            embedder: Arc::new(embedder),
            translation_slots: Semaphore::new(limits.translation.max(1)),
            chat_slots: Semaphore::new(limits.chat.max(1)),
            embedding_slots: Semaphore::new(limits.embedding.max(1)),
            dimension: OnceLock::new(),
        }
    }

    pub fn translator_model(&self) -> &str {
        self.translator.model_name()
    }

    pub fn chat_model(&self) -> &str {
        self.chat.model_name()
    }

    pub fn embedding_model(&self) -> &str {
        self.embedder.model_name()
    }

    /// Translates `text`; identical source and target return the text untouched.
    pub async fn translate(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, BackendError> {
        if source == target {
            return Ok(text.to_string());
        }
        for code in [source, target] {
            if !code.is_flores() || !self.translator.supports(code) {
                return Err(BackendError::Configuration {
                    service: "translation",
                    detail: format!("unsupported language code {code}"),
                });
            }
        }
        let _slot = self.translation_slots.acquire().await.expect("semaphore closed");
        let out = self.translator.translate(text, source, target).await?;
        if out.trim().is_empty() && !text.trim().is_empty() {
            return Err(BackendError::EmptyResponse {
                service: "translation",
            });
        }
        Ok(out)
    }

    pub async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::Configuration {
                service: "chat",
                detail: "empty prompt".into(),
            });
        }
        let _slot = self.chat_slots.acquire().await.expect("semaphore closed");
        let out = self.chat.chat(prompt).await?;
        if out.trim().is_empty() {
            return Err(BackendError::EmptyResponse { service: "chat" });
        }
        Ok(out)
    }

    pub async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::Decode {
                service: "embedding",
                detail: "cannot embed blank text".into(),
            });
        }
        let embedding = {
            let _slot = self.embedding_slots.acquire().await.expect("semaphore closed");
            self.embedder.embed(text).await?
        };
        if embedding.dimension() == 0 || !embedding.is_finite() {
            return Err(BackendError::Decode {
                service: "embedding",
                detail: "embedding is empty or has non-finite values".into(),
            });
        }
        let expected = *self.dimension.get_or_init(|| embedding.dimension());
        if expected != embedding.dimension() {
            return Err(BackendError::DimensionDrift {
                expected,
                got: embedding.dimension(),
            });
        }
        Ok(embedding)
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{Failing, IdentityTranslator, OrthogonalEmbedder, ScriptedChat};
    use super::*;

    struct Shrinking(AtomicUsize);

    #[async_trait]
    impl Embedder for Shrinking {
        fn model_name(&self) -> &str {
            "shrinking"
        }
        async fn embed(&self, _text: &str) -> Result<Embedding, BackendError> {
            let n = 4 - self.0.fetch_add(1, Ordering::SeqCst);
            Ok(Embedding::new(vec![1.0; n]))
        }
    }

    #[tokio::test]
    async fn identity_translation_skips_backend() {
        let translator = Counted::new(Failing::new("t"));
        let calls = translator.counter();
        let backends = Backends::new(translator, ScriptedChat::default(), Failing::new("e"));
        let eng = LanguageCode::from("eng_Latn");
        assert_eq!(backends.translate("q", &eng, &eng).await.unwrap(), "q");
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[tokio::test]
    async fn malformed_code_is_configuration_error() {
        let backends = Backends::new(IdentityTranslator, ScriptedChat::default(), Failing::new("e"));
        let err = backends
            .translate("q", &"eng_Latn".into(), &"german".into())
            .await
            .unwrap_err();
        assert!(err.is_fatal());
    }

    #[tokio::test]
    async fn empty_generation_is_an_error() {
        let chat = ScriptedChat::new(vec![], Some("   ".into()));
        let backends = Backends::new(IdentityTranslator, chat, Failing::new("e"));
        assert_eq!(
            backends.chat("prompt").await,
            Err(BackendError::EmptyResponse { service: "chat" })
        );
    }

    #[tokio::test]
    async fn dimension_drift_is_fatal() {
        let backends = Backends::new(
            IdentityTranslator,
            ScriptedChat::default(),
            Shrinking(AtomicUsize::new(0)),
        );
        backends.embed("a").await.unwrap();
        let err = backends.embed("b").await.unwrap_err();
        assert_eq!(err, BackendError::DimensionDrift { expected: 4, got: 3 });
        assert!(err.is_fatal());
    }

    #[tokio::test]
    async fn embeddings_are_deterministic() {
        let backends = Backends::new(
            IdentityTranslator,
            ScriptedChat::default(),
            OrthogonalEmbedder::new(["x", "y"]),
        );
        let a = backends.embed("x").await.unwrap();
        assert_eq!(a, backends.embed("x").await.unwrap());
    }
}

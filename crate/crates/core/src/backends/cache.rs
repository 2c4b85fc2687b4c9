//! Persistent record/replay cache.
//!
//! Records live under `<root>/<service>/<digest>.json`, one JSON document
//! per request holding the verbatim request and response. The digest is the
//! SHA-256 of the canonical JSON of `{service, backend fingerprint, request}`,
//! so it is stable across processes. Records are written once and never
//! replaced. Store I/O failures degrade to uncached calls with a warning.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{ChatModel, Embedder, ServiceKind, Translator};
use crate::calibration::Embedding;
use crate::error::BackendError;
use crate::types::LanguageCode;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub kind: ServiceKind,
    pub model_name: String,
    pub digest: String,
}

impl CacheKey {
    pub fn new(kind: ServiceKind, model_name: &str, fingerprint: &Value, request: &Value) -> Self {
        let canonical = json!({
            "kind": kind,
            "backend": fingerprint,
            "request": request,
        });
        // serde_json objects are key-sorted, so this serialization is canonical.
        let bytes = serde_json::to_vec(&canonical).expect("JSON values always serialize");
        CacheKey {
            kind,
            model_name: model_name.to_string(),
            digest: hex::encode(Sha256::digest(&bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub request: Value,
    pub response: Value,
}

#[derive(Debug)]
pub struct CacheStore {
    root: PathBuf,
    writes: Mutex<()>,
}

impl CacheStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(CacheStore {
            root,
            writes: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root.join(key.kind.as_str()).join(format!("{}.json", key.digest))
    }

    /// Returns the stored response for `key`, if a matching record exists.
    pub fn load(&self, key: &CacheKey, request: &Value) -> io::Result<Option<Value>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let record: CacheRecord = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        if &record.request != request {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: stored request differs from lookup", path.display()),
            ));
        }
        Ok(Some(record.response))
    }

    /// Writes the record unless one already exists for `key`.
    pub fn store(&self, key: &CacheKey, request: &Value, response: &Value) -> io::Result<()> {
        let path = self.path_for(key);
        let _guard = self.writes.lock().unwrap_or_else(|p| p.into_inner());
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("record path has a parent");
        fs::create_dir_all(dir)?;
        let record = CacheRecord {
            key: key.clone(),
            request: request.clone(),
            response: response.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, &record)?;
        tmp.write_all(b"\n")?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(e.error),
        }
    }

    pub fn len(&self) -> usize {
        [ServiceKind::Translation, ServiceKind::Chat, ServiceKind::Embedding]
            .iter()
            .filter_map(|k| fs::read_dir(self.root.join(k.as_str())).ok())
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A backend whose responses are recorded in, and replayed from, a [`CacheStore`].
pub struct Cached<B> {
    inner: B,
    store: Arc<CacheStore>,
    offline: bool,
}

pub fn with_cache<B>(inner: B, store: Arc<CacheStore>) -> Cached<B> {
    Cached {
        inner,
        store,
        offline: false,
    }
}

impl<B> Cached<B> {
    /// Replay only: a cache miss fails instead of reaching `inner`.
    pub fn offline(inner: B, store: Arc<CacheStore>) -> Self {
        Cached {
            inner,
            store,
            offline: true,
        }
    }

    async fn serve<F, Fut>(
        &self,
        kind: ServiceKind,
        model: &str,
        fingerprint: Value,
        request: Value,
        fetch: F,
    ) -> Result<Value, BackendError>
    where
        F: FnOnce() -> Fut,
        Fut: std::future::Future<Output = Result<Value, BackendError>>,
    {
        let key = CacheKey::new(kind, model, &fingerprint, &request);
        match self.store.load(&key, &request) {
            Ok(Some(hit)) => return Ok(hit),
            Ok(None) => {}
            Err(e) => tracing::warn!(error = %e, "cache read failed; calling backend"),
        }
        if self.offline {
            return Err(BackendError::Unavailable {
                service: kind.as_str(),
                context: String::new(),
                detail: format!("offline and no cached response for {}", key.digest),
            });
        }
        let response = fetch().await?;
        if let Err(e) = self.store.store(&key, &request, &response) {
            tracing::warn!(error = %e, "cache write failed; continuing uncached");
        }
        Ok(response)
    }
}

fn decode_text(kind: ServiceKind, value: Value) -> Result<String, BackendError> {
    match value {
        Value::String(s) => Ok(s),
        other => Err(BackendError::Decode {
            service: kind.as_str(),
            detail: format!("cached response is not text: {other}"),
        }),
    }
}

#[async_trait]
impl<B: Translator> Translator for Cached<B> {
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
        let request = json!({ "text": text, "source": source, "target": target });
        let value = self
            .serve(
                ServiceKind::Translation,
                self.inner.model_name(),
                self.inner.fingerprint(),
                request,
                || async { self.inner.translate(text, source, target).await.map(Value::String) },
            )
            .await?;
        decode_text(ServiceKind::Translation, value)
    }
}

#[async_trait]
impl<B: ChatModel> ChatModel for Cached<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn fingerprint(&self) -> Value {
        self.inner.fingerprint()
    }
    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        let value = self
            .serve(
                ServiceKind::Chat,
                self.inner.model_name(),
                self.inner.fingerprint(),
                json!({ "prompt": prompt }),
                || async { self.inner.chat(prompt).await.map(Value::String) },
            )
            .await?;
        decode_text(ServiceKind::Chat, value)
    }
}

#[async_trait]
impl<B: Embedder> Embedder for Cached<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn fingerprint(&self) -> Value {
        self.inner.fingerprint()
    }
    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let value = self
            .serve(
                ServiceKind::Embedding,
                self.inner.model_name(),
                self.inner.fingerprint(),
                json!({ "text": text }),
                || async {
                    let e = self.inner.embed(text).await?;
                    Ok(serde_json::to_value(e).expect("embedding serializes"))
                },
            )
            .await?;
        serde_json::from_value(value).map_err(|e| BackendError::Decode {
            service: "embedding",
            detail: format!("cached embedding: {e}"),
        })
    }
}

//! HTTP JSON clients with per-service schema adapters.
//!
//! A [`SchemaAdapter`] names the request path, a JSON request template and
//! the dotted field path of the output in the response. Template strings of
//! the form `{{name}}` are substituted: an exact placeholder is replaced by
//! the variable's JSON value (so `"{{temperature}}"` becomes a number, and a
//! null variable removes the field), while placeholders embedded in longer
//! strings are spliced in as text.
//!
//! Variables: `model`, `text`, `source`, `target` (translation), `prompt`,
//! `temperature`, `seed` (chat), `text` (embedding).

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::retry::{with_retries, Attempt, RetryPolicy};
use super::{ChatModel, Embedder, ServiceKind, Translator};
use crate::calibration::Embedding;
use crate::error::BackendError;
use crate::types::LanguageCode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaAdapter {
    /// Appended to the endpoint's base URL.
    pub path: String,
    pub request: Value,
    /// Dotted path to the output; numeric segments index arrays.
    pub response: String,
}

impl SchemaAdapter {
    /// OpenAI-compatible `/v1/chat/completions`, as served by SGLang, vLLM and friends.
    pub fn openai_chat() -> Self {
        SchemaAdapter {
            path: "/v1/chat/completions".into(),
            request: json!({
                "model": "{{model}}",
                "messages": [{ "role": "user", "content": "{{prompt}}" }],
                "temperature": "{{temperature}}",
                "seed": "{{seed}}",
            }),
            response: "choices.0.message.content".into(),
        }
    }

    pub fn openai_embeddings() -> Self {
        SchemaAdapter {
            path: "/v1/embeddings".into(),
            request: json!({ "model": "{{model}}", "input": "{{text}}" }),
            response: "data.0.embedding".into(),
        }
    }

    pub fn generic_translation() -> Self {
        SchemaAdapter {
            path: "/translate".into(),
            request: json!({
                "model": "{{model}}",
                "text": "{{text}}",
                "source": "{{source}}",
                "target": "{{target}}",
            }),
            response: "translation".into(),
        }
    }

    pub fn libretranslate() -> Self {
        SchemaAdapter {
            path: "/translate".into(),
            request: json!({
                "q": "{{text}}",
                "source": "{{source}}",
                "target": "{{target}}",
                "format": "text",
            }),
            response: "translatedText".into(),
        }
    }

    pub fn preset(kind: ServiceKind, name: &str) -> Option<Self> {
        match (kind, name) {
            (ServiceKind::Chat, "openai") => Some(Self::openai_chat()),
            (ServiceKind::Embedding, "openai") => Some(Self::openai_embeddings()),
            (ServiceKind::Translation, "generic") => Some(Self::generic_translation()),
            (ServiceKind::Translation, "libretranslate") => Some(Self::libretranslate()),
            _ => None,
        }
    }

    pub fn default_for(kind: ServiceKind) -> Self {
        match kind {
            ServiceKind::Translation => Self::generic_translation(),
            ServiceKind::Chat => Self::openai_chat(),
            ServiceKind::Embedding => Self::openai_embeddings(),
        }
    }

    pub fn render(&self, vars: &BTreeMap<&str, Value>) -> Value {
        render(&self.request, vars).unwrap_or(Value::Null)
    }

    pub fn extract<'a>(&self, response: &'a Value) -> Option<&'a Value> {
        lookup(response, &self.response)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AdapterSpec {
    Preset(String),
    Custom(SchemaAdapter),
}

fn placeholder(s: &str) -> Option<&str> {
    s.strip_prefix("{{")?.strip_suffix("}}").filter(|n| !n.contains('{'))
}

// None means "drop this field".
fn render(template: &Value, vars: &BTreeMap<&str, Value>) -> Option<Value> {
    match template {
        Value::String(s) => {
            if let Some(name) = placeholder(s) {
                return match vars.get(name) {
                    Some(Value::Null) | None => None,
                    Some(v) => Some(v.clone()),
                };
            }
            let mut out = s.clone();
            for (name, value) in vars {
                let needle = format!("{{{{{name}}}}}");
                if out.contains(&needle) {
                    let text = match value {
                        Value::String(s) => s.clone(),
                        Value::Null => String::new(),
                        other => other.to_string(),
                    };
                    out = out.replace(&needle, &text);
                }
            }
            Some(Value::String(out))
        }
        Value::Array(items) => Some(Value::Array(
            items.iter().map(|v| render(v, vars).unwrap_or(Value::Null)).collect(),
        )),
        Value::Object(fields) => {
            let mut out = Map::new();
            for (k, v) in fields {
                if let Some(rendered) = render(v, vars) {
                    out.insert(k.clone(), rendered);
                }
            }
            Some(Value::Object(out))
        }
        other => Some(other.clone()),
    }
}

pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|s| !s.is_empty())
        .try_fold(value, |v, segment| match v {
            Value::Array(items) => segment.parse::<usize>().ok().and_then(|i| items.get(i)),
            Value::Object(map) => map.get(segment),
            _ => None,
        })
}

fn default_timeout_secs() -> f64 {
    60.0
}

fn default_max_retries() -> u32 {
    3
}

/// One configured service endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<AdapterSpec>,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Language codes the service accepts; unrestricted when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub languages: Option<Vec<LanguageCode>>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            temperature: 0.0,
            seed: None,
            adapter: None,
            api_key_env: None,
            languages: None,
        }
    }
}

/// Shared HTTP machinery for the three service clients.
#[derive(Debug, Clone)]
pub struct HttpService {
    kind: ServiceKind,
    config: EndpointConfig,
    adapter: SchemaAdapter,
    url: reqwest::Url,
    client: reqwest::Client,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl HttpService {
    pub fn new(kind: ServiceKind, config: EndpointConfig) -> Result<Self, BackendError> {
        let bad = |detail: String| BackendError::Configuration {
            service: kind.as_str(),
            detail,
        };
        if !(config.timeout_secs > 0.0 && config.timeout_secs.is_finite()) {
            return Err(bad(format!("timeout must be positive, got {}", config.timeout_secs)));
        }
        if !(config.temperature >= 0.0 && config.temperature.is_finite()) {
            return Err(bad(format!("temperature must be >= 0, got {}", config.temperature)));
        }
        let adapter = match &config.adapter {
            None => SchemaAdapter::default_for(kind),
            Some(AdapterSpec::Custom(a)) => a.clone(),
            Some(AdapterSpec::Preset(name)) => SchemaAdapter::preset(kind, name)
                .ok_or_else(|| bad(format!("no {kind} adapter preset named {name:?}")))?,
        };
        let joined = format!(
            "{}/{}",
            config.base_url.trim_end_matches('/'),
            adapter.path.trim_start_matches('/')
        );
        let url = reqwest::Url::parse(&joined).map_err(|e| bad(format!("{joined}: {e}")))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| bad(format!("environment variable {var} not set")))?,
            ),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| bad(e.to_string()))?;
        let retry = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Ok(HttpService {
            kind,
            config,
            adapter,
            url,
            client,
            retry,
            api_key,
        })
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn base_vars(&self) -> BTreeMap<&'static str, Value> {
        let mut vars = BTreeMap::new();
        vars.insert("model", Value::String(self.config.model.clone()));
        vars.insert("temperature", json!(self.config.temperature));
        vars.insert("seed", self.config.seed.map_or(Value::Null, |s| json!(s)));
        vars
    }

    /// Posts the rendered request and returns the adapter's output field.
    async fn call(&self, vars: BTreeMap<&'static str, Value>, context: String) -> Result<Value, BackendError> {
        let body = self.adapter.render(&vars);
        let service = self.kind.as_str();
        let unavailable = |detail: String| BackendError::Unavailable {
            service,
            context: context.clone(),
            detail,
        };
        let response: Value = with_retries(&self.retry, || async {
            let mut request = self.client.post(self.url.clone()).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let response = match request.send().await {
                Ok(r) => r,
                Err(e) => return Attempt::Transient(unavailable(e.to_string())),
            };
            let status = response.status();
            if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
                return Attempt::Transient(unavailable(format!("HTTP {status}")));
            }
            if matches!(status.as_u16(), 401 | 403 | 404 | 405) {
                return Attempt::Permanent(BackendError::Configuration {
                    service,
                    detail: format!("HTTP {status} from {}", self.url),
                });
            }
            if !status.is_success() {
                let text = response.text().await.unwrap_or_default();
                return Attempt::Permanent(unavailable(format!("HTTP {status}: {text}")));
            }
            match response.json::<Value>().await {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Transient(unavailable(format!("invalid JSON body: {e}"))),
            }
        })
        .await?;
        self.adapter
            .extract(&response)
            .cloned()
            .ok_or_else(|| BackendError::Decode {
                service,
                detail: format!("field {:?} missing from response", self.adapter.response),
            })
    }

    async fn call_text(&self, vars: BTreeMap<&'static str, Value>, context: String) -> Result<String, BackendError> {
        match self.call(vars, context).await? {
            Value::String(s) => Ok(s),
            other => Err(BackendError::Decode {
                service: self.kind.as_str(),
                detail: format!("expected text, got {other}"),
            }),
        }
    }
}

pub struct HttpTranslator(HttpService);
pub struct HttpChat(HttpService);
pub struct HttpEmbedder(HttpService);

impl HttpTranslator {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        HttpService::new(ServiceKind::Translation, config).map(HttpTranslator)
    }

    pub fn from_service(service: HttpService) -> Self {
        HttpTranslator(service)
    }
}

impl HttpChat {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        HttpService::new(ServiceKind::Chat, config).map(HttpChat)
    }

    pub fn from_service(service: HttpService) -> Self {
        HttpChat(service)
    }
}

impl HttpEmbedder {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        HttpService::new(ServiceKind::Embedding, config).map(HttpEmbedder)
    }

    pub fn from_service(service: HttpService) -> Self {
        HttpEmbedder(service)
    }
}

#[async_trait]
impl Translator for HttpTranslator {
    fn model_name(&self) -> &str {
        &self.0.config.model
    }

    fn supports(&self, code: &LanguageCode) -> bool {
        self.0.config.languages.as_ref().is_none_or(|l| l.contains(code))
    }

    async fn translate(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, BackendError> {
        let mut vars = self.0.base_vars();
        vars.insert("text", json!(text));
        vars.insert("source", json!(source.as_str()));
        vars.insert("target", json!(target.as_str()));
        self.0.call_text(vars, format!(" for {source}->{target}")).await
    }
}

#[async_trait]
impl ChatModel for HttpChat {
    fn model_name(&self) -> &str {
        &self.0.config.model
    }

    fn fingerprint(&self) -> Value {
        json!({
            "model": self.0.config.model,
            "temperature": self.0.config.temperature,
            "seed": self.0.config.seed,
        })
    }

    async fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        let mut vars = self.0.base_vars();
        vars.insert("prompt", json!(prompt));
        self.0.call_text(vars, String::new()).await
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn model_name(&self) -> &str {
        &self.0.config.model
    }

    async fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let mut vars = self.0.base_vars();
        vars.insert("text", json!(text));
        let value = self.0.call(vars, String::new()).await?;
        let values = value
            .as_array()
            .and_then(|items| items.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| BackendError::Decode {
                service: "embedding",
                detail: "expected an array of numbers".into(),
            })?;
        Ok(Embedding::new(values))
    }
}

//! Configuration file schema and its resolution against flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::{builtin_language_sets, model_profiles};
use super::CliError;
use crate::backends::http::EndpointConfig;
use crate::backends::ConcurrencyLimits;
use crate::pipeline::{PromptTemplate, PromptTemplates, RunMode};
use crate::types::{
    LanguageCode, LanguageSet, RunConfig, DEFAULT_BOOST_THRESHOLD, DEFAULT_BOOST_WEIGHT, DEFAULT_JUDGE_THRESHOLD,
    DEFAULT_NGRAM_SIZE, DEFAULT_SAMPLE_SIZE, DEFAULT_SEED,
};

/// Offline stand-ins for the three services, selected with `mock = "<kind>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    /// Translator: returns the text unchanged.
    Identity,
    /// Translator: appends a language tag, removed again on the way home.
    Tag,
    /// Chat: answers with the first listed option.
    EchoFirstChoice,
    /// Chat: answers with `text` for every prompt.
    Constant,
    /// Chat: answers with the gold answer of the prompted item.
    GoldEcho,
    /// Chat: answers correctly with probability `accuracy`, deterministically per prompt.
    NoisyOracle,
    /// Any service: every request fails.
    Failing,
    /// Embedder: hashed character n-gram counts of `dimension` buckets.
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSpec {
    pub mock: MockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendSpec {
    Mock(MockSpec),
    Http(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    pub translation: BackendSpec,
    pub chat: BackendSpec,
    pub embedding: BackendSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcurrencyConfig {
    #[serde(default = "default_items")]
    pub items: usize,
    #[serde(default = "default_slots")]
    pub translation: usize,
    #[serde(default = "default_slots")]
    pub chat: usize,
    #[serde(default = "default_slots")]
    pub embedding: usize,
}

fn default_items() -> usize {
    4
}

fn default_slots() -> usize {
    8
}

impl Default for ConcurrencyConfig {
    fn default() -> Self {
        ConcurrencyConfig {
            items: default_items(),
            translation: default_slots(),
            chat: default_slots(),
            embedding: default_slots(),
        }
    }
}

impl ConcurrencyConfig {
    pub fn limits(&self) -> ConcurrencyLimits {
        ConcurrencyLimits {
            translation: self.translation,
            chat: self.chat,
            embedding: self.embedding,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptsConfig {
    #[serde(default)]
    pub default: Option<PromptTemplate>,
    #[serde(default)]
    pub templates: BTreeMap<LanguageCode, PromptTemplate>,
}

/// The configuration file as written. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub mode: Option<RunMode>,
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub target_language: Option<LanguageCode>,
    #[serde(default)]
    pub aux_set: Option<String>,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub ngram_size: Option<usize>,
    #[serde(default)]
    pub judge_threshold: Option<f64>,
    #[serde(default)]
    pub similarity_boost_threshold: Option<f64>,
    #[serde(default)]
    pub boost_weight: Option<f64>,
    /// Number of equally spaced cutoffs in the sweep.
    #[serde(default)]
    pub grid_steps: Option<usize>,
    /// Judged results of a baseline run to compare against.
    #[serde(default)]
    pub baseline_results: Option<PathBuf>,
    #[serde(default)]
    pub concurrency: ConcurrencyConfig,
    #[serde(default)]
    pub language_sets: BTreeMap<String, Vec<LanguageCode>>,
    #[serde(default)]
    pub prompts: PromptsConfig,
    pub backends: BackendsConfig,
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    /// Reads the file and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read configuration {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.dataset);
        resolve(&mut config.output_dir);
        if let Some(p) = config.cache_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.baseline_results.as_mut() {
            resolve(p);
        }
        Ok(config)
    }

    /// Named sets, with sets from the file shadowing the presets.
    pub fn language_sets(&self) -> Result<BTreeMap<String, LanguageSet>, CliError> {
        let mut sets = builtin_language_sets();
        for (name, languages) in &self.language_sets {
            sets.insert(name.clone(), LanguageSet::new(name.clone(), languages.clone())?);
        }
        Ok(sets)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub cutoff: Option<f64>,
    pub aux_set: Option<String>,
    pub target_language: Option<LanguageCode>,
    pub mode: Option<RunMode>,
    pub seed: Option<u64>,
    pub sample_size: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
}

/// Everything a run depends on after defaults and overrides are applied.
/// Paths are deliberately absent so that equivalent runs describe themselves
/// identically wherever their files live.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub mode: RunMode,
    pub profile: Option<String>,
    pub run: RunConfig,
    pub grid_steps: usize,
    pub concurrency: ConcurrencyConfig,
    pub backends: BackendsConfig,
    /// Shipped templates with the file's overrides applied.
    pub prompts: PromptTemplates,
}

/// Applies overrides and defaults. `dataset_language` is used as the target
/// when neither the file nor the flags name one.
pub fn resolve(
    config: &AppConfig,
    overrides: &Overrides,
    dataset_language: Option<&LanguageCode>,
) -> Result<ResolvedConfig, CliError> {
    let mode = overrides.mode.or(config.mode).unwrap_or(RunMode::Mka);

    let target = overrides
        .target_language
        .clone()
        .or_else(|| config.target_language.clone())
        .or_else(|| dataset_language.cloned())
        .ok_or_else(|| {
            CliError::Usage("no target language: the dataset mixes languages, set target_language".into())
        })?;

    let sets = config.language_sets()?;
    let auxiliary_set = match overrides.aux_set.as_ref().or(config.aux_set.as_ref()) {
        Some(name) => sets.get(name).cloned().ok_or_else(|| {
            let known: Vec<&str> = sets.keys().map(String::as_str).collect();
            CliError::Usage(format!("unknown auxiliary set {name:?}; known sets: {}", known.join(", ")))
        })?,
        None if mode == RunMode::Baseline => LanguageSet {
            name: "target".into(),
            languages: vec![target.clone()],
        },
        None => return Err(CliError::Usage("no auxiliary set: set aux_set or pass --aux-set".into())),
    };

    let profile_cutoff = match &config.profile {
        Some(name) => Some(
            *model_profiles()
                .get(name.as_str())
                .ok_or_else(|| CliError::Usage(format!("unknown model profile {name:?}")))?,
        ),
        None => None,
    };
    let cutoff = match overrides.cutoff.or(config.cutoff).or(profile_cutoff) {
        Some(c) => c,
        // Baseline runs never abstain, so the cutoff only labels the summary.
        None if mode == RunMode::Baseline => 0.0,
        None => return Err(CliError::Usage("no cutoff: set cutoff or a model profile".into())),
    };

    let mut run = RunConfig::new(target, auxiliary_set, cutoff);
    run.seed = overrides.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    run.sample_size = overrides.sample_size.or(config.sample_size).unwrap_or(DEFAULT_SAMPLE_SIZE);
    run.ngram_size = config.ngram_size.unwrap_or(DEFAULT_NGRAM_SIZE);
    run.judge_threshold = config.judge_threshold.unwrap_or(DEFAULT_JUDGE_THRESHOLD);
    run.similarity_boost_threshold = config.similarity_boost_threshold.unwrap_or(DEFAULT_BOOST_THRESHOLD);
    run.boost_weight = config.boost_weight.unwrap_or(DEFAULT_BOOST_WEIGHT);
    run.item_concurrency = config.concurrency.items;
    run.validate()?;

    let grid_steps = config.grid_steps.unwrap_or(50);
    if grid_steps == 0 {
        return Err(CliError::Usage("grid_steps must be positive".into()));
    }

    Ok(ResolvedConfig {
        mode,
        profile: config.profile.clone(),
        run,
        grid_steps,
        concurrency: config.concurrency,
        backends: config.backends.clone(),
        prompts: PromptTemplates::shipped().merged(config.prompts.default.clone(), config.prompts.templates.clone()),
    })
}

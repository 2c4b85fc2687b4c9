//! The `run` and `baseline` commands.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{resolve, AppConfig, BackendSpec, MockKind, MockSpec, Overrides, ResolvedConfig};
use super::report::{sweep_judged, write_sweep_files};
use super::{
    create_dir, read_input, read_jsonl, write_file, write_jsonl, CliError, CURVE_FILE, JUDGED_FILE,
    SUMMARY_FILE, SWEEP_FILE, TRACES_FILE,
};
use crate::backends::cache::{with_cache, CacheStore, Cached};
use crate::backends::http::{HttpChat, HttpEmbedder, HttpTranslator};
use crate::backends::mock::{
    ConstantChat, EchoFirstChoice, Failing, HashingEmbedder, IdentityTranslator, NoisyOracleChat, ScriptedChat,
    TagTranslator,
};
use crate::backends::{Backends, ChatModel, Embedder, Translator};
use crate::evaluation::{
    confusion, judge_results, judged_only, metrics, optimal_cutoff, plain_accuracy, uniform_grid, OptimalCutoff, SweepRow,
};
use crate::pipeline::audit::AuditRecord;
use crate::pipeline::{ItemResult, Pipeline, RunMode};
use crate::types::{validate_dataset, EvalItem, LanguageCode, DEFAULT_NGRAM_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    /// SHA-256 of the dataset file's bytes.
    pub sha256: String,
    /// Items in the file.
    pub items: usize,
    /// Items in the target language.
    pub in_target_language: usize,
    /// Items actually run, after sampling.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    pub baseline_accuracy: f64,
    pub ac_eff_at_cutoff: f64,
    pub best_ac_eff: f64,
    /// `(best_ac_eff - baseline_accuracy) / baseline_accuracy`; absent for a zero baseline.
    pub relative_change: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ResolvedConfig,
    pub dataset: DatasetInfo,
    pub models: Models,
    /// Items whose pipeline produced no usable answer.
    pub failed_items: usize,
    /// Items left out of the metrics because judging failed.
    pub unjudged_items: usize,
    /// Fraction judged correct, ignoring abstention.
    pub accuracy: f64,
    pub at_cutoff: SweepRow,
    pub optimal: OptimalCutoff,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_comparison: Option<BaselineComparison>,
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Models {
    pub translation: String,
    pub chat: String,
    pub embedding: String,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let d = &self.dataset;
        let _ = writeln!(s, "{} items evaluated ({} failed, {} unjudged)", d.evaluated, self.failed_items, self.unjudged_items);
        match self.config.mode {
            RunMode::Baseline => {
                let _ = writeln!(s, "accuracy: {}", self.accuracy);
            }
            RunMode::Mka => {
                let m = &self.at_cutoff.metrics;
                let _ = writeln!(
                    s,
                    "cutoff {}: AC_eff {} (AC_comp {}, coverage {})",
                    self.at_cutoff.cutoff, m.ac_eff, m.ac_comp, m.coverage
                );
                let _ = writeln!(
                    s,
                    "optimal cutoff: {} (AC_eff {})",
                    self.optimal.cutoff, self.optimal.mean_accuracy
                );
            }
        }
        s
    }
}

fn translator(spec: &BackendSpec, home: &LanguageCode) -> Result<Arc<dyn Translator>, CliError> {
    Ok(match spec {
        BackendSpec::Http(c) => Arc::new(HttpTranslator::new(c.clone())?),
        BackendSpec::Mock(m) => match m.mock {
            MockKind::Identity => Arc::new(IdentityTranslator),
            MockKind::Tag => Arc::new(TagTranslator::new(home.clone())),
            MockKind::Failing => Arc::new(Failing::new("failing")),
            other => return Err(wrong_mock("translation", other)),
        },
    })
}

fn chat(spec: &BackendSpec, items: &[EvalItem]) -> Result<Arc<dyn ChatModel>, CliError> {
    Ok(match spec {
        BackendSpec::Http(c) => Arc::new(HttpChat::new(c.clone())?),
        BackendSpec::Mock(m) => match m.mock {
            MockKind::EchoFirstChoice => Arc::new(EchoFirstChoice),
            MockKind::Constant => Arc::new(ConstantChat(required(m, m.text.clone(), "text")?)),
            MockKind::GoldEcho => Arc::new(ScriptedChat::gold_echo(items)),
            MockKind::NoisyOracle => {
                let accuracy = required(m, m.accuracy, "accuracy")?;
                if !(0.0..=1.0).contains(&accuracy) {
                    return Err(CliError::Usage(format!("noisy_oracle accuracy {accuracy} outside [0, 1]")));
                }
                Arc::new(NoisyOracleChat::new(items, accuracy))
            }
            MockKind::Failing => Arc::new(Failing::new("failing")),
            other => return Err(wrong_mock("chat", other)),
        },
    })
}

fn embedder(spec: &BackendSpec) -> Result<Arc<dyn Embedder>, CliError> {
    Ok(match spec {
        BackendSpec::Http(c) => Arc::new(HttpEmbedder::new(c.clone())?),
        BackendSpec::Mock(m) => match m.mock {
            MockKind::Hashing => Arc::new(HashingEmbedder::new(m.dimension.unwrap_or(256), DEFAULT_NGRAM_SIZE)),
            MockKind::Failing => Arc::new(Failing::new("failing")),
            other => return Err(wrong_mock("embedding", other)),
        },
    })
}

fn required<T>(spec: &MockSpec, value: Option<T>, field: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("mock {:?} requires `{field}`", spec.mock)))
}

fn wrong_mock(service: &str, kind: MockKind) -> CliError {
    CliError::Usage(format!("mock {kind:?} cannot serve as the {service} backend"))
}

/// Wraps a backend in the response cache, in replay-only mode when offline.
fn cached<B>(inner: B, store: &Option<Arc<CacheStore>>, offline: bool) -> Result<Cached<B>, B> {
    match store {
        Some(s) if offline => Ok(Cached::offline(inner, s.clone())),
        Some(s) => Ok(with_cache(inner, s.clone())),
        None => Err(inner),
    }
}

fn build_backends(
    resolved: &ResolvedConfig,
    items: &[EvalItem],
    cache_dir: Option<&Path>,
    offline: bool,
) -> Result<Backends, CliError> {
    let store = match cache_dir {
        Some(dir) => match CacheStore::open(dir) {
            Ok(s) => Some(Arc::new(s)),
            Err(e) if offline => {
                return Err(CliError::Usage(format!("cannot open cache {}: {e}", dir.display())));
            }
            Err(e) => {
                tracing::warn!(error = %e, dir = %dir.display(), "cache unavailable; running uncached");
                None
            }
        },
        None if offline => return Err(CliError::Usage("--offline requires a cache directory".into())),
        None => None,
    };
    let b = &resolved.backends;
    let t = translator(&b.translation, &resolved.run.target_language)?;
    let c = chat(&b.chat, items)?;
    let e = embedder(&b.embedding)?;
    let limits = resolved.concurrency.limits();

    // Cached<Arc<dyn _>> and Arc<dyn _> are distinct types; erase both to Arc<dyn _>.
    let t: Arc<dyn Translator> = match cached(t, &store, offline) {
        Ok(w) => Arc::new(w),
        Err(raw) => raw,
    };
    let c: Arc<dyn ChatModel> = match cached(c, &store, offline) {
        Ok(w) => Arc::new(w),
        Err(raw) => raw,
    };
    let e: Arc<dyn Embedder> = match cached(e, &store, offline) {
        Ok(w) => Arc::new(w),
        Err(raw) => raw,
    };
    Ok(Backends::with_limits(t, c, e, limits))
}

/// The one language shared by every item, if any.
fn common_language(items: &[EvalItem]) -> Option<&LanguageCode> {
    let first = &items.first()?.target_language;
    items.iter().all(|i| &i.target_language == first).then_some(first)
}

pub async fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<Summary, CliError> {
    execute(config_path, overrides.clone()).await
}

/// As [`cmd_run`] with the mode fixed to baseline.
pub async fn cmd_baseline(config_path: &Path, overrides: &Overrides) -> Result<Summary, CliError> {
    if overrides.mode == Some(RunMode::Mka) {
        return Err(CliError::Usage("the baseline command cannot run in mka mode".into()));
    }
    let overrides = Overrides {
        mode: Some(RunMode::Baseline),
        ..overrides.clone()
    };
    execute(config_path, overrides).await
}

async fn execute(config_path: &Path, overrides: Overrides) -> Result<Summary, CliError> {
    let config = AppConfig::load(config_path)?;
    let bytes = read_input(&config.dataset, "dataset")?;
    let all_items = super::parse_jsonl::<EvalItem>(&bytes, &config.dataset)?;
    let problems = validate_dataset(&all_items);
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    let resolved = resolve(&config, &overrides, common_language(&all_items))?;
    let run = &resolved.run;

    let items: Vec<EvalItem> = all_items
        .iter()
        .filter(|i| i.target_language == run.target_language)
        .cloned()
        .collect();
    if items.is_empty() {
        return Err(CliError::Usage(format!(
            "the dataset has no items in the target language {}",
            run.target_language
        )));
    }

    let cache_dir = overrides.cache_dir.as_deref().or(config.cache_dir.as_deref());
    let backends = Arc::new(build_backends(&resolved, &all_items, cache_dir, overrides.offline)?);
    let pipeline = Pipeline::new(run.clone(), resolved.prompts.clone(), backends.clone())?;

    tracing::info!(items = items.len(), mode = ?resolved.mode, "running");
    let mut results = pipeline.run_set(&items, resolved.mode).await?;
    let unjudged = judge_results(&mut results, run.judge_threshold, &backends, run.item_concurrency).await?;

    let grid = uniform_grid(resolved.grid_steps);
    let (rows, _) = sweep_judged(&results, &grid)?;
    let optimal = optimal_cutoff(std::slice::from_ref(&rows))?;
    let (judged, _) = judged_only(&results);
    let counts = confusion(&judged, run.cutoff)?;
    let at_cutoff = SweepRow {
        cutoff: run.cutoff,
        counts,
        metrics: metrics(&counts)?,
    };
    let accuracy = plain_accuracy(&judged)?;

    let baseline_comparison = match (&config.baseline_results, resolved.mode) {
        (Some(path), RunMode::Mka) => {
            let baseline: Vec<ItemResult> = read_jsonl(path, "baseline results")?;
            let (baseline, _) = judged_only(&baseline);
            let baseline_accuracy = plain_accuracy(&baseline)?;
            Some(BaselineComparison {
                baseline_accuracy,
                ac_eff_at_cutoff: at_cutoff.metrics.ac_eff,
                best_ac_eff: optimal.mean_accuracy,
                relative_change: (baseline_accuracy > 0.0)
                    .then(|| (optimal.mean_accuracy - baseline_accuracy) / baseline_accuracy),
            })
        }
        _ => None,
    };

    let summary = Summary {
        dataset: DatasetInfo {
            sha256: hex::encode(Sha256::digest(bytes.as_bytes())),
            items: all_items.len(),
            in_target_language: items.len(),
            evaluated: results.len(),
        },
        models: Models {
            translation: backends.translator_model().to_string(),
            chat: backends.chat_model().to_string(),
            embedding: backends.embedding_model().to_string(),
        },
        failed_items: results.iter().filter(|r| r.outcome.failed).count(),
        unjudged_items: unjudged,
        accuracy,
        at_cutoff,
        optimal,
        baseline_comparison,
        sweep: rows,
        config: resolved,
    };

    let out = &config.output_dir;
    create_dir(out)?;
    write_jsonl(&out.join(TRACES_FILE), results.iter().map(AuditRecord::from))?;
    write_jsonl(&out.join(JUDGED_FILE), &results)?;
    write_sweep_files(out, &summary.sweep, SWEEP_FILE, CURVE_FILE)?;
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&out.join(SUMMARY_FILE), &json)?;
    Ok(summary)
}

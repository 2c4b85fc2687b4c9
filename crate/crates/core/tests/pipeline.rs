mod common;

use std::sync::Arc;

use common::*;
use mka::backends::cache::{with_cache, CacheStore, Cached};
use mka::backends::mock::{
    ConstantChat, EchoFirstChoice, Failing, HashingEmbedder, IdentityTranslator, NoisyOracleChat, ScriptedChat,
    TagTranslator,
};
use mka::backends::{Backends, Counted};
use mka::error::{BackendError, PipelineError};
use mka::evaluation::judge_results;
use mka::pipeline::audit::AuditRecord;
use mka::pipeline::PromptTemplates;
use mka::types::TraceStage;
use mka::{Decision, LanguageSet, Pipeline, RunMode};

fn pipeline_with(backends: Backends, cutoff: f64) -> (Pipeline, Arc<Backends>) {
    let backends = Arc::new(backends);
    let p = Pipeline::new(high_config(cutoff), PromptTemplates::shipped(), backends.clone()).unwrap();
    (p, backends)
}

#[tokio::test]
async fn cortex_trace_replay() {
    let (pipeline, backends) = cortex_pipeline(0.64);
    let mut results = vec![pipeline.run_item(&cortex_item()).await.unwrap()];
    let r = &results[0];

    let answers: Vec<&str> = r.traces.iter().map(|t| t.back_translated_answer.as_str()).collect();
    assert_eq!(
        answers,
        ["the cortex", "The cortex", "[Cortex] What is it?", "[crust]", "The cortex", "the cortex"]
    );
    let extracted: Vec<&str> = r.traces.iter().map(|t| t.extracted_answer.as_str()).collect();
    assert_eq!(extracted, ["the cortex", "Kortex", "cortex", "corteza", "皮层", "córtex"]);

    assert_eq!(r.outcome.selected_index, Some(0));
    assert_eq!(r.outcome.selected_answer.as_deref(), Some("the cortex"));
    assert!((r.outcome.confidence_raw - 1.0362).abs() < 1e-9);
    assert_eq!(r.outcome.confidence, 1.0);
    assert_eq!(r.outcome.decision, Decision::Answer);

    let sims: Vec<Option<f64>> = r.similarities.iter().map(|s| s.map(|v| (v * 1000.0).round() / 1000.0)).collect();
    assert_eq!(sims, [None, Some(1.0), Some(0.496), Some(0.185), Some(1.0), Some(1.0)]);

    judge_results(&mut results, 0.85, &backends, 1).await.unwrap();
    assert_eq!(results[0].outcome.judged_correct, Some(true));
    assert!((results[0].judge_similarity.unwrap() - 0.956).abs() < 1e-12);
}

#[tokio::test]
async fn audit_record_lays_out_every_stage() {
    let (pipeline, backends) = cortex_pipeline(0.64);
    let mut results = vec![pipeline.run_item(&cortex_item()).await.unwrap()];
    judge_results(&mut results, 0.85, &backends, 1).await.unwrap();
    let audit = AuditRecord::from(&results[0]);
    assert_eq!(audit.translated_prompts.len(), 6);
    assert_eq!(audit.translated_prompts[1].choices, ["Synapse", "Kortex", "Hirnstamm", "Zerebellum"]);
    assert_eq!(audit.responses[2].raw, "[cortex]");
    assert!(audit.back_translations[0].selected);
    assert_eq!(audit.back_translations.iter().filter(|b| b.selected).count(), 1);
    assert_eq!(audit.decision.correct, Some(true));
    let line = serde_json::to_string(&audit).unwrap();
    assert_eq!(serde_json::from_str::<AuditRecord>(&line).unwrap(), audit);
}

#[tokio::test]
async fn unanimous_answers_clamp_to_full_confidence() {
    let items = quiz(1);
    let backends = Backends::new(TagTranslator::new("eng_Latn".into()), EchoFirstChoice, HashingEmbedder::default());
    let (p, _) = pipeline_with(backends, 0.99);
    let r = p.run_item(&items[0]).await.unwrap();
    assert!(r.traces.iter().all(|t| t.back_translated_answer == "right 0"));
    assert!((r.outcome.confidence_raw - 1.5).abs() < 1e-12);
    assert_eq!(r.outcome.confidence, 1.0);
    assert_eq!(r.outcome.decision, Decision::Answer);
}

#[tokio::test]
async fn all_traces_failing_forces_abstention() {
    let items = quiz(1);
    let backends = Backends::new(IdentityTranslator, Failing::new("down"), HashingEmbedder::default());
    let (p, backends) = pipeline_with(backends, 0.0);
    let mut results = p.run_set(&items, RunMode::Mka).await.unwrap();
    let r = &results[0];
    assert!(r.outcome.failed);
    assert_eq!(r.outcome.decision, Decision::Abstain);
    assert_eq!(r.outcome.confidence, 0.0);
    assert!(r.traces.iter().all(|t| t.failure.as_ref().unwrap().stage == TraceStage::Chat));

    judge_results(&mut results, 0.85, &backends, 1).await.unwrap();
    assert_eq!(results[0].outcome.judged_correct, Some(false));
}

#[tokio::test]
async fn failed_traces_are_left_out_of_polling() {
    let item = cortex_item();
    // Only German and the English target produce anything.
    let chat = ScriptedChat::default()
        .rule(QUESTION, ENGLISH_RESPONSE)
        .rule(CORTEX_ROWS[0].1, CORTEX_ROWS[0].3);
    let (p, _) = pipeline_with(Backends::new(cortex_translator(), chat, cortex_embedder()), 0.64);
    let r = p.run_item(&item).await.unwrap();
    assert_eq!(r.successful_traces().count(), 2);
    assert_eq!(r.outcome.selected_answer.as_deref(), Some("the cortex"));
    // The single corroborating answer has similarity 1, boosted to 1.5.
    assert!((r.outcome.confidence_raw - 1.5).abs() < 1e-12);
    assert_eq!(r.selected_trace().unwrap().language.as_str(), "eng_Latn");
}

#[tokio::test]
async fn single_surviving_trace_has_zero_confidence() {
    let chat = ScriptedChat::default().rule(QUESTION, ENGLISH_RESPONSE);
    let (p, _) = pipeline_with(Backends::new(cortex_translator(), chat, cortex_embedder()), 0.01);
    let r = p.run_item(&cortex_item()).await.unwrap();
    assert_eq!(r.outcome.confidence, 0.0);
    assert_eq!(r.outcome.decision, Decision::Abstain);
    assert!(!r.outcome.failed);
}

#[tokio::test]
async fn embedding_failure_keeps_answer_but_abstains() {
    let backends = Backends::new(TagTranslator::new("eng_Latn".into()), EchoFirstChoice, Failing::new("no-embed"));
    let (p, _) = pipeline_with(backends, 0.0);
    let r = p.run_item(&quiz(1)[0]).await.unwrap();
    assert!(r.outcome.failed);
    assert_eq!(r.outcome.selected_answer.as_deref(), Some("right 0"));
    assert_eq!(r.outcome.decision, Decision::Abstain);
}

#[tokio::test]
async fn fatal_errors_abort_the_run() {
    let set = LanguageSet::new("odd", vec!["eng_Latn".into(), "german".into()]);
    assert!(set.is_err());

    let backends = Backends::new(TagTranslator::new("eng_Latn".into()), EchoFirstChoice, HashingEmbedder::default());
    let mut item = quiz(1).remove(0);
    item.target_language = "English".into();
    let (p, _) = pipeline_with(backends, 0.5);
    match p.run_item(&item).await {
        Err(PipelineError::Backend(BackendError::Configuration { .. })) => {}
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn call_counts_follow_the_language_count() {
    let translator = Counted::new(TagTranslator::new("eng_Latn".into()));
    let chat = Counted::new(EchoFirstChoice);
    let embed = Counted::new(HashingEmbedder::default());
    let (t, c, e) = (translator.counter(), chat.counter(), embed.counter());
    let (p, _) = pipeline_with(Backends::new(translator, chat, embed), 0.5);
    p.run_item(&quiz(1)[0]).await.unwrap();
    // Five non-target languages: question, joined choices, answer.
    assert_eq!(t.load(std::sync::atomic::Ordering::SeqCst), 15);
    assert_eq!(c.load(std::sync::atomic::Ordering::SeqCst), 6);
    // All six answers are the same text, embedded once.
    assert_eq!(e.load(std::sync::atomic::Ordering::SeqCst), 1);
}

#[tokio::test]
async fn target_only_set_needs_no_translation() {
    let translator = Counted::new(Failing::new("never-called"));
    let calls = translator.counter();
    let backends = Arc::new(Backends::new(translator, EchoFirstChoice, HashingEmbedder::default()));
    let mut config = high_config(0.5);
    config.auxiliary_set = LanguageSet::new("eng", vec!["eng_Latn".into()]).unwrap();
    let p = Pipeline::new(config, PromptTemplates::shipped(), backends).unwrap();
    let r = p.run_item(&quiz(1)[0]).await.unwrap();
    assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 0);
    assert_eq!(r.outcome.selected_answer.as_deref(), Some("right 0"));
}

#[tokio::test]
async fn baseline_answers_once_without_translation() {
    let translator = Counted::new(Failing::new("never-called"));
    let calls = translator.counter();
    let items = quiz(3);
    let backends = Backends::new(translator, ScriptedChat::gold_echo(&items), HashingEmbedder::default());
    let (p, backends) = pipeline_with(backends, 0.99);
    let mut results = p.run_set(&items, RunMode::Baseline).await.unwrap();
    assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 0);
    for r in &results {
        assert_eq!(r.traces.len(), 1);
        assert_eq!(r.outcome.decision, Decision::Answer);
        assert_eq!(r.outcome.confidence, 1.0);
    }
    judge_results(&mut results, 0.85, &backends, 2).await.unwrap();
    assert!(results.iter().all(|r| r.outcome.judged_correct == Some(true)));
}

#[tokio::test]
async fn baseline_chat_failure_is_judged_incorrect() {
    let items = quiz(1);
    let (p, backends) = pipeline_with(Backends::new(IdentityTranslator, Failing::new("x"), HashingEmbedder::default()), 0.5);
    let mut results = p.run_set(&items, RunMode::Baseline).await.unwrap();
    assert!(results[0].outcome.failed);
    assert_eq!(results[0].outcome.selected_answer, None);
    judge_results(&mut results, 0.85, &backends, 1).await.unwrap();
    assert_eq!(results[0].outcome.judged_correct, Some(false));
}

#[tokio::test]
async fn baseline_ignores_wrong_constant() {
    let items = quiz(2);
    let backends = Backends::new(IdentityTranslator, ConstantChat("no idea".into()), HashingEmbedder::default());
    let (p, backends) = pipeline_with(backends, 0.5);
    let mut results = p.run_set(&items, RunMode::Baseline).await.unwrap();
    judge_results(&mut results, 0.85, &backends, 1).await.unwrap();
    assert!(results.iter().all(|r| r.outcome.judged_correct == Some(false)));
}

#[tokio::test]
async fn run_set_preserves_order_and_is_deterministic() {
    let items = quiz(40);
    let make = || {
        let backends = Backends::new(
            TagTranslator::new("eng_Latn".into()),
            NoisyOracleChat::new(&items, 0.5),
            HashingEmbedder::default(),
        );
        let mut config = high_config(0.6);
        config.sample_size = 25;
        config.item_concurrency = 7;
        Pipeline::new(config, PromptTemplates::shipped(), Arc::new(backends)).unwrap()
    };
    let a = make().run_set(&items, RunMode::Mka).await.unwrap();
    let b = make().run_set(&items, RunMode::Mka).await.unwrap();
    assert_eq!(a.len(), 25);
    assert_eq!(a, b);
    let ids: Vec<&str> = a.iter().map(|r| r.item.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[tokio::test]
async fn warm_cache_replays_without_the_backends() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(CacheStore::open(dir.path()).unwrap());
    let items = quiz(4);

    let cold_chat = Counted::new(NoisyOracleChat::new(&items, 0.5));
    let cold_calls = cold_chat.counter();
    let cold = Backends::new(
        with_cache(TagTranslator::new("eng_Latn".into()), store.clone()),
        with_cache(cold_chat, store.clone()),
        with_cache(HashingEmbedder::default(), store.clone()),
    );
    let (p, _) = pipeline_with(cold, 0.6);
    let first = p.run_set(&items, RunMode::Mka).await.unwrap();
    assert_eq!(cold_calls.load(std::sync::atomic::Ordering::SeqCst), 24);

    // Same model names and fingerprints, but every live call would fail.
    let warm_chat = Counted::new(NoisyOracleChat::new(&items, 0.5));
    let warm_calls = warm_chat.counter();
    let warm = Backends::new(
        Cached::offline(TagTranslator::new("eng_Latn".into()), store.clone()),
        Cached::offline(warm_chat, store.clone()),
        Cached::offline(HashingEmbedder::default(), store.clone()),
    );
    let (p, _) = pipeline_with(warm, 0.6);
    let second = p.run_set(&items, RunMode::Mka).await.unwrap();
    assert_eq!(warm_calls.load(std::sync::atomic::Ordering::SeqCst), 0);
    assert_eq!(first, second);
}

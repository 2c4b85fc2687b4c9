#![allow(dead_code)]

use std::sync::Arc;

use mka::backends::mock::{ScriptedChat, SimilarityTableEmbedder, TableTranslator, Unlisted};
use mka::backends::Backends;
use mka::cli::builtin_language_sets;
use mka::pipeline::PromptTemplates;
use mka::{EvalItem, LanguageCode, Pipeline, RunConfig};

pub const QUESTION: &str = "At birth, the least developed part of the brain is the";
pub const CHOICES: [&str; 4] = ["visual system", "cortex", "brain stem", "cerebellum"];

pub fn cortex_item() -> EvalItem {
    EvalItem {
        id: "cortex".into(),
        question: QUESTION.into(),
        choices: CHOICES.iter().map(|s| s.to_string()).collect(),
        gold_answer: "cortex".into(),
        target_language: "eng_Latn".into(),
    }
}

/// Language, translated question, translated choices, model response, and the
/// back-translation of the extracted response.
pub type CortexRow = (&'static str, &'static str, [&'static str; 4], &'static str, &'static str);

pub const CORTEX_ROWS: [CortexRow; 5] = [
    (
        "deu_Latn",
        "Bei der Geburt ist der am wenigsten entwickelte Teil des Gehirns die",
        ["Synapse", "Kortex", "Hirnstamm", "Zerebellum"],
        "Kortex",
        "The cortex",
    ),
    (
        "fra_Latn",
        "À la naissance, la partie du cerveau le moins développée est le",
        ["système visuel", "cortex", "tronc cérébral", "cervelet"],
        "[cortex]",
        "[Cortex] What is it?",
    ),
    (
        "spa_Latn",
        "Al nacer, la parte menos desarrollada del cerebro es el",
        ["sistema visual", "corteza", "tronco cerebral", "cerebelo"],
        "[corteza]",
        "[crust]",
    ),
    (
        "zho_Hans",
        "在出生时,大脑最不发达的部分是",
        ["视觉系统", "皮层", "脑干", "小脑"],
        "皮层",
        "The cortex",
    ),
    (
        "por_Latn",
        "No nascimento, a parte menos desenvolvida do cérebro é a",
        ["sistema visual", "córtex", "tronco cerebral", "cerebelo"],
        "córtex",
        "the cortex",
    ),
];

/// The English response. The target-language trace is never translated, so
/// the response is scripted directly in its back-translated form.
pub const ENGLISH_RESPONSE: &str = "the cortex";

fn strip_brackets(s: &str) -> &str {
    s.trim_start_matches('[').trim_end_matches(']')
}

pub fn cortex_translator() -> TableTranslator {
    let mut t = TableTranslator::new(Unlisted::Fail);
    for (lang, question, choices, response, back) in CORTEX_ROWS {
        t = t.entry(QUESTION, lang, question);
        for (source, translated) in CHOICES.iter().zip(choices) {
            t = t.entry(source, lang, translated);
        }
        t = t.entry(strip_brackets(response), "eng_Latn", back);
    }
    t
}

pub fn cortex_chat() -> ScriptedChat {
    let mut chat = ScriptedChat::default().rule(QUESTION, ENGLISH_RESPONSE);
    for (_, question, _, response, _) in CORTEX_ROWS {
        chat = chat.rule(question, response);
    }
    chat
}

/// Replays the similarity column, and the 0.956 similarity of the gold answer.
pub fn cortex_embedder() -> SimilarityTableEmbedder {
    SimilarityTableEmbedder::new(
        "the cortex",
        &[("The cortex", 1.0), ("[Cortex] What is it?", 0.496), ("[crust]", 0.185), ("cortex", 0.956)],
    )
}

pub fn high_config(cutoff: f64) -> RunConfig {
    RunConfig::new(LanguageCode::from("eng_Latn"), builtin_language_sets()["high"].clone(), cutoff)
}

pub fn cortex_pipeline(cutoff: f64) -> (Pipeline, Arc<Backends>) {
    let backends = Arc::new(Backends::new(cortex_translator(), cortex_chat(), cortex_embedder()));
    let pipeline = Pipeline::new(high_config(cutoff), PromptTemplates::shipped(), backends.clone()).unwrap();
    (pipeline, backends)
}

pub fn item(id: &str, question: &str, choices: &[&str], gold: &str) -> EvalItem {
    EvalItem {
        id: id.into(),
        question: question.into(),
        choices: choices.iter().map(|s| s.to_string()).collect(),
        gold_answer: gold.into(),
        target_language: "eng_Latn".into(),
    }
}

pub fn quiz(n: usize) -> Vec<EvalItem> {
    (0..n)
        .map(|i| {
            item(
                &format!("q{i:03}"),
                &format!("Question number {i}: which option is right?"),
                &[&format!("right {i}"), &format!("wrong {i}"), "neither", "both"],
                &format!("right {i}"),
            )
        })
        .collect()
}

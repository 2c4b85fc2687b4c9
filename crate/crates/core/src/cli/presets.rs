use std::collections::BTreeMap;

use crate::types::{LanguageCode, LanguageSet};

const HIGH: [&str; 6] = ["eng_Latn", "deu_Latn", "fra_Latn", "spa_Latn", "zho_Hans", "por_Latn"];
const MID: [&str; 6] = ["ell_Grek", "heb_Hebr", "hin_Deva", "ind_Latn", "ukr_Cyrl", "vie_Latn"];
const LOW: [&str; 6] = ["tel_Telu", "npi_Deva", "mai_Deva", "bho_Deva", "yor_Latn", "zul_Latn"];

/// Auxiliary language sets by resource level: `high`, `mid` and `low`.
pub fn builtin_language_sets() -> BTreeMap<String, LanguageSet> {
    [("high", HIGH), ("mid", MID), ("low", LOW)]
        .into_iter()
        .map(|(name, codes)| {
            let set = LanguageSet {
                name: name.to_string(),
                languages: codes.iter().map(|&c| LanguageCode::from(c)).collect(),
            };
            (name.to_string(), set)
        })
        .collect()
}

/// Target languages of the reference experiments.
pub const TARGET_LANGUAGES: [&str; 6] = ["ben_Beng", "eng_Latn", "swh_Latn", "yor_Latn", "jpn_Jpan", "ind_Latn"];

/// Confidence cutoffs found best per prompting model.
pub fn model_profiles() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("aya-expanse-8b", 0.70),
        ("qwen2.5-7b", 0.58),
        ("gemma2-2b", 0.66),
        ("gemma2-9b", 0.64),
        ("gemma2-27b", 0.64),
    ])
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::types::LanguageCode;

pub const QUESTION_SLOT: &str = "{question}";
pub const CHOICES_SLOT: &str = "{choices}";

const SHIPPED: &str = include_str!("../../assets/prompts.toml");

/// Prompt text with one `{question}` and one `{choices}` slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, ConfigError> {
        let text = text.into();
        for slot in [QUESTION_SLOT, CHOICES_SLOT] {
            let count = text.matches(slot).count();
            if count != 1 {
                return Err(ConfigError::Template(format!(
                    "expected exactly one {slot} placeholder, found {count}"
                )));
            }
        }
        Ok(PromptTemplate { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Fills both slots in one pass, so slot-like text inside the question is left alone.
    pub fn render(&self, question: &str, choices: &[String]) -> Result<String, ConfigError> {
        if choices.is_empty() {
            return Err(ConfigError::Template("no choices to enumerate".into()));
        }
        let listed = enumerate_choices(choices);
        let q_at = self.text.find(QUESTION_SLOT).expect("validated");
        let c_at = self.text.find(CHOICES_SLOT).expect("validated");
        let mut slots = [(q_at, QUESTION_SLOT, question), (c_at, CHOICES_SLOT, listed.as_str())];
        slots.sort_by_key(|s| s.0);
        let mut out = String::with_capacity(self.text.len() + question.len() + listed.len());
        let mut cursor = 0;
        for (at, slot, value) in slots {
            out.push_str(&self.text[cursor..at]);
            out.push_str(value);
            cursor = at + slot.len();
        }
        out.push_str(&self.text[cursor..]);
        Ok(out.trim().to_string())
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        PromptTemplate::new(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> String {
        t.text
    }
}

pub fn option_label(index: usize) -> String {
    if index < 26 {
        ((b'A' + index as u8) as char).to_string()
    } else {
        (index + 1).to_string()
    }
}

/// `A. first\nB. second\n...`
pub fn enumerate_choices(choices: &[String]) -> String {
    choices
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", option_label(i), c.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Templates keyed by prompting language, with a fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub default: PromptTemplate,
    #[serde(default)]
    pub templates: BTreeMap<LanguageCode, PromptTemplate>,
}

impl PromptTemplates {
    /// The instruction texts bundled with the crate.
    pub fn shipped() -> Self {
        toml::from_str(SHIPPED).expect("bundled prompt templates are valid")
    }

    pub fn for_language(&self, language: &LanguageCode) -> &PromptTemplate {
        self.templates.get(language).unwrap_or(&self.default)
    }

    /// Per-language overrides replace existing entries; `default` replaces the fallback when given.
    pub fn merged(mut self, default: Option<PromptTemplate>, overrides: BTreeMap<LanguageCode, PromptTemplate>) -> Self {
        if let Some(d) = default {
            self.default = d;
        }
        self.templates.extend(overrides);
        self
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::shipped()
    }
}

/// Fills `template` with the question and enumerated choices.
pub fn build_prompt(question: &str, choices: &[String], template: &PromptTemplate) -> Result<String, ConfigError> {
    template.render(question, choices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choices() -> Vec<String> {
        ["visual system", "cortex", "brain stem", "cerebellum"]
            .map(String::from)
            .to_vec()
    }

    #[test]
    fn question_then_choices_then_instruction() {
        let templates = PromptTemplates::shipped();
        let template = templates.for_language(&"eng_Latn".into());
        let q = "At birth, the least developed part of the brain is the";
        let prompt = build_prompt(q, &choices(), template).unwrap();
        let q_at = prompt.find(q).unwrap();
        let a_at = prompt.find("A. visual system").unwrap();
        let d_at = prompt.find("D. cerebellum").unwrap();
        let i_at = prompt.find("Answer with").unwrap();
        assert!(q_at < a_at && a_at < d_at && d_at < i_at);
        assert_eq!(prompt, build_prompt(q, &choices(), template).unwrap());
    }

    #[test]
    fn empty_choices_rejected() {
        let t = PromptTemplate::new("{question} {choices}").unwrap();
        assert!(build_prompt("q", &[], &t).is_err());
    }

    #[test]
    fn placeholder_counts_enforced() {
        assert!(PromptTemplate::new("{question}").is_err());
        assert!(PromptTemplate::new("{question} {choices} {choices}").is_err());
        assert!(PromptTemplate::new("{choices}\n{question}").is_ok());
    }

    #[test]
    fn slot_text_in_question_is_not_expanded() {
        let t = PromptTemplate::new("{question}\n{choices}").unwrap();
        let p = t.render("what is {choices}?", &["x".to_string()]).unwrap();
        assert_eq!(p, "what is {choices}?\nA. x");
    }

    #[test]
    fn unknown_language_uses_default() {
        let templates = PromptTemplates::shipped();
        assert_eq!(templates.for_language(&"zul_Latn".into()), &templates.default);
        assert_ne!(templates.for_language(&"deu_Latn".into()), &templates.default);
    }
}

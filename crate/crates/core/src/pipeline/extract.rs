use std::sync::LazyLock;

use regex::Regex;

static OPTION_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\(?(?:[A-Za-z]|[0-9]{1,2})[\).:](?:\s+|$)").expect("static regex"));
static ANSWER_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:final\s+)?answer\s*[:：]\s*").expect("static regex"));

const PAIRS: &[(&str, &str)] = &[
    ("**", "**"),
    ("[", "]"),
    ("(", ")"),
    ("{", "}"),
    ("「", "」"),
    ("«", "»"),
    ("“", "”"),
    ("\"", "\""),
    ("'", "'"),
    ("`", "`"),
];

/// Reduces a raw generation to the bare answer text.
///
/// Keeps the first non-empty line outside markup fences, then repeatedly
/// strips an `Answer:` label, an option prefix such as `B)` or `2.`, and
/// wrappers that enclose the whole line (`[cortex]`, `**cortex**`).
/// Returns an empty string when nothing is left.
pub fn extract_answer(generation: &str) -> String {
    let Some(line) = generation
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("```"))
    else {
        return String::new();
    };
    let mut current = line.to_string();
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn strip_once(s: &str) -> String {
    let s = s.trim();
    let s = ANSWER_LABEL.replace(s, "");
    let s = OPTION_PREFIX.replace(&s, "");
    let s = s.trim();
    for (open, close) in PAIRS {
        if let Some(inner) = wrapped(s, open, close) {
            return inner.trim().to_string();
        }
    }
    s.to_string()
}

/// The inside of `s` if `open`/`close` enclose all of it.
fn wrapped<'a>(s: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let inner = s.strip_prefix(open)?.strip_suffix(close)?;
    if open == close {
        return (!inner.contains(open)).then_some(inner);
    }
    let mut depth = 0usize;
    for (i, _) in inner.char_indices() {
        let rest = &inner[i..];
        if rest.starts_with(open) {
            depth += 1;
        } else if rest.starts_with(close) {
            if depth == 0 {
                return None;
            }
            depth -= 1;
        }
    }
    (depth == 0).then_some(inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brackets_are_unwrapped() {
        assert_eq!(extract_answer("[cortex]"), "cortex");
        assert_eq!(extract_answer("[corteza]"), "corteza");
    }

    #[test]
    fn option_prefixes_are_stripped() {
        assert_eq!(extract_answer("B) cortex"), "cortex");
        assert_eq!(extract_answer("2. cortex"), "cortex");
        assert_eq!(extract_answer("(C) brain stem"), "brain stem");
        assert_eq!(extract_answer("Answer: B. cortex"), "cortex");
    }

    #[test]
    fn clean_answers_are_unchanged() {
        assert_eq!(extract_answer("cortex"), "cortex");
        assert_eq!(extract_answer("皮层"), "皮层");
        assert_eq!(extract_answer("2.5 meters"), "2.5 meters");
    }

    #[test]
    fn first_line_outside_fences() {
        assert_eq!(extract_answer("\n```\n**Kortex**\n```\nBecause..."), "Kortex");
        assert_eq!(extract_answer("  cortex  \nexplanation"), "cortex");
    }

    #[test]
    fn partial_wrappers_are_kept() {
        assert_eq!(extract_answer("[Cortex] What is it?"), "[Cortex] What is it?");
        assert_eq!(extract_answer("[a] or [b]"), "[a] or [b]");
    }

    #[test]
    fn nothing_left_is_empty() {
        assert_eq!(extract_answer(""), "");
        assert_eq!(extract_answer("```\n```"), "");
        assert_eq!(extract_answer("[]"), "");
        assert_eq!(extract_answer("B)"), "");
    }
}

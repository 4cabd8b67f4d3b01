use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const TAGS: [&str; 4] = ["<think>", "</think>", "<answer>", "</answer>"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatMode {
    /// Only whitespace may surround the two spans.
    #[default]
    Strict,
    /// Arbitrary text may precede `<think>` and follow `</answer>`.
    Lenient,
}

/// A model output split into its reasoning and answer spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub raw: String,
    pub think: String,
    pub answer: String,
    pub format_ok: bool,
}

impl ParsedOutput {
    fn invalid(raw: &str) -> Self {
        Self {
            raw: raw.to_string(),
            think: String::new(),
            answer: String::new(),
            format_ok: false,
        }
    }
}

fn template(mode: FormatMode) -> &'static Regex {
    static STRICT: OnceLock<Regex> = OnceLock::new();
    static LENIENT: OnceLock<Regex> = OnceLock::new();
    match mode {
        FormatMode::Strict => STRICT.get_or_init(|| {
            Regex::new(r"(?s)\A\s*<think>(.*)</think>\s*<answer>(.*)</answer>\s*\z").unwrap()
        }),
        FormatMode::Lenient => {
            LENIENT.get_or_init(|| Regex::new(r"(?s)<think>(.*)</think>\s*<answer>(.*)</answer>").unwrap())
        }
    }
}

/// Checks the `<think>...</think> <answer>...</answer>` template. Tags are
/// case-sensitive and each must occur exactly once; span contents are trimmed.
pub fn parse_output(raw: &str, mode: FormatMode) -> ParsedOutput {
    if TAGS.iter().any(|tag| raw.matches(tag).count() != 1) {
        return ParsedOutput::invalid(raw);
    }
    match template(mode).captures(raw) {
        Some(caps) => ParsedOutput {
            raw: raw.to_string(),
            think: caps[1].trim().to_string(),
            answer: caps[2].trim().to_string(),
            format_ok: true,
        },
        None => ParsedOutput::invalid(raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict(raw: &str) -> ParsedOutput {
        parse_output(raw, FormatMode::Strict)
    }

    #[test]
    fn canonical_form() {
        let p = strict("<think>plan</think> <answer>hi</answer>");
        assert!(p.format_ok);
        assert_eq!((p.think.as_str(), p.answer.as_str()), ("plan", "hi"));
        let p = strict("\n <think>\n a \n</think>\n\n<answer> b c </answer>\n");
        assert!(p.format_ok);
        assert_eq!((p.think.as_str(), p.answer.as_str()), ("a", "b c"));
    }

    #[test]
    fn rejections() {
        for raw in [
            "<answer>hi</answer>",
            "<think>a</think>",
            "<think>a</think><answer>b</answer><answer>c</answer>",
            "<think>a</think><think>b</think><answer>c</answer>",
            "<answer>b</answer><think>a</think>",
            "<think>a<think>x</think></think><answer>b</answer>",
            "<THINK>a</THINK><answer>b</answer>",
            "prefix <think>a</think><answer>b</answer>",
            "<think>a</think> junk <answer>b</answer>",
            "<think>a</think><answer>b</answer> suffix",
            "",
        ] {
            let p = strict(raw);
            assert!(!p.format_ok, "{raw:?}");
            assert!(p.think.is_empty() && p.answer.is_empty());
        }
    }

    #[test]
    fn lenient_allows_outer_text() {
        let p = parse_output("Assistant: <think>a</think><answer>b</answer> done", FormatMode::Lenient);
        assert!(p.format_ok);
        assert_eq!(p.answer, "b");
        assert!(!parse_output("<think>a</think> junk <answer>b</answer>", FormatMode::Lenient).format_ok);
    }
}

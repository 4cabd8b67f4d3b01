//! Tokenization into [`TokenSequence`] values.
//!
//! Whitespace-delimited languages are split on whitespace and then have
//! leading/trailing punctuation detached one character at a time. Scripts
//! written without spaces (Chinese, Japanese, Thai, ...) are segmented per
//! codepoint, except that contiguous Latin/digit runs stay together. Callers
//! with a real segmenter can either register it as a [`Segmenter`] hook or
//! hand over pre-tokenized input via [`TokenSequence::from_pretokenized`].

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("empty token at index {index}")]
    EmptyToken { index: usize },
}

/// Why a sequence was produced with a fallback segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentationWarning {
    /// Unknown language, no hook and no whitespace: split per codepoint.
    CodepointFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    lang: String,
    pretokenized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<SegmentationWarning>,
}

impl TokenSequence {
    /// Stores externally segmented tokens verbatim.
    pub fn from_pretokenized<S: AsRef<str>>(tokens: &[S], lang: &str) -> Result<Self, TokenError> {
        let mut out = Vec::with_capacity(tokens.len());
        for (index, t) in tokens.iter().enumerate() {
            let t = t.as_ref();
            if t.is_empty() {
                return Err(TokenError::EmptyToken { index });
            }
            out.push(t.to_string());
        }
        Ok(Self {
            tokens: out,
            lang: lang.to_string(),
            pretokenized: true,
            warning: None,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn is_pretokenized(&self) -> bool {
        self.pretokenized
    }

    pub fn warning(&self) -> Option<SegmentationWarning> {
        self.warning
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// A per-language word segmenter plugged into a [`Tokenizer`].
///
/// Implementations receive NFC-normalized text and must not return empty
/// tokens (they are dropped if they do).
pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<String>;
}

impl<F> Segmenter for F
where
    F: Fn(&str) -> Vec<String> + Send + Sync,
{
    fn segment(&self, text: &str) -> Vec<String> {
        self(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Script {
    Spaced,
    Unspaced,
    Unknown,
}

const UNSPACED_LANGS: &[&str] = &["zh", "ja", "th", "lo", "km", "my", "bo", "yue", "wuu"];

const SPACED_LANGS: &[&str] = &[
    "en", "de", "fr", "es", "it", "pt", "nl", "ru", "pl", "cs", "sk", "sl", "sv", "da", "no",
    "nb", "nn", "fi", "et", "lv", "lt", "tr", "ro", "hu", "el", "uk", "bg", "hr", "sr", "bs",
    "mk", "ar", "fa", "he", "hi", "bn", "ur", "id", "ms", "vi", "ca", "eu", "gl", "ga", "cy",
    "is", "ko", "sw", "tl", "af", "sq", "hy", "ka", "kk", "uz", "az", "mn", "ta", "te", "mr",
    "gu", "kn", "ml", "pa", "ne", "si", "am", "ha", "yo", "zu", "xh", "eo", "la",
];

/// Primary subtag, lowercased: `"zh-Hans-CN"` -> `"zh"`.
pub fn primary_subtag(lang: &str) -> String {
    lang.split(['-', '_'])
        .next()
        .unwrap_or_default()
        .to_ascii_lowercase()
}

fn script_of(lang: &str) -> Script {
    let primary = primary_subtag(lang);
    if UNSPACED_LANGS.contains(&primary.as_str()) {
        Script::Unspaced
    } else if SPACED_LANGS.contains(&primary.as_str()) {
        Script::Spaced
    } else {
        Script::Unknown
    }
}

/// Tokenizer with an immutable segmenter-hook registry.
#[derive(Clone, Default)]
pub struct Tokenizer {
    hooks: HashMap<String, Arc<dyn Segmenter>>,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut langs: Vec<_> = self.hooks.keys().collect();
        langs.sort();
        f.debug_struct("Tokenizer").field("hooks", &langs).finish()
    }
}

#[derive(Default)]
pub struct TokenizerBuilder {
    hooks: HashMap<String, Arc<dyn Segmenter>>,
}

impl TokenizerBuilder {
    /// Registers `segmenter` for a language (matched on the primary subtag).
    pub fn segmenter(mut self, lang: &str, segmenter: impl Segmenter + 'static) -> Self {
        self.hooks.insert(primary_subtag(lang), Arc::new(segmenter));
        self
    }

    pub fn build(self) -> Tokenizer {
        Tokenizer { hooks: self.hooks }
    }
}

impl Tokenizer {
    pub fn builder() -> TokenizerBuilder {
        TokenizerBuilder::default()
    }

    pub fn has_hook(&self, lang: &str) -> bool {
        self.hooks.contains_key(&primary_subtag(lang))
    }

    pub fn tokenize(&self, text: &str, lang: &str) -> TokenSequence {
        let text: String = text.nfc().collect();
        let mut warning = None;
        let tokens = if let Some(hook) = self.hooks.get(&primary_subtag(lang)) {
            hook.segment(&text)
                .into_iter()
                .filter(|t| !t.is_empty())
                .collect()
        } else {
            match script_of(lang) {
                Script::Spaced => split_spaced(&text),
                Script::Unspaced => split_unspaced(&text),
                Script::Unknown => {
                    // Only whitespace between content counts as word separation.
                    let inner = text.trim();
                    if inner.is_empty() || inner.contains(char::is_whitespace) {
                        split_spaced(&text)
                    } else {
                        warning = Some(SegmentationWarning::CodepointFallback);
                        split_unspaced(&text)
                    }
                }
            }
        };
        TokenSequence {
            tokens,
            lang: lang.to_string(),
            pretokenized: false,
            warning,
        }
    }
}

/// Tokenizes with the built-in rules only (no hooks).
pub fn tokenize(text: &str, lang: &str) -> TokenSequence {
    static DEFAULT: OnceLock<Tokenizer> = OnceLock::new();
    DEFAULT.get_or_init(Tokenizer::default).tokenize(text, lang)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_mark(c)
}

// Combining marks that survive NFC (Devanagari vowel signs, Thai tone marks, ...).
fn is_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x0483..=0x0489 | 0x0591..=0x05C7 | 0x0610..=0x061A
        | 0x064B..=0x065F | 0x0900..=0x0903 | 0x093A..=0x094F | 0x0951..=0x0957
        | 0x0962..=0x0963 | 0x0981..=0x0983 | 0x09BC..=0x09D7 | 0x0E31 | 0x0E34..=0x0E3A
        | 0x0E47..=0x0E4E | 0x0EB1 | 0x0EB4..=0x0EBC | 0x0EC8..=0x0ECD | 0x1AB0..=0x1AFF
        | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

/// Characters that form one token each in unspaced scripts.
fn is_unspaced_char(c: char) -> bool {
    matches!(c as u32,
        0x0E00..=0x0EFF          // Thai, Lao
        | 0x0F00..=0x0FFF        // Tibetan
        | 0x1000..=0x109F        // Myanmar
        | 0x1780..=0x17FF        // Khmer
        | 0x3040..=0x30FF        // Hiragana, Katakana
        | 0x3400..=0x4DBF        // CJK Ext A
        | 0x4E00..=0x9FFF        // CJK Unified
        | 0xAC00..=0xD7AF        // Hangul syllables
        | 0xF900..=0xFAFF        // CJK compatibility
        | 0x20000..=0x3134F) // CJK Ext B..G
}

fn split_spaced(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let Some(first) = chars.iter().position(|&c| is_word_char(c)) else {
            out.extend(chars.iter().map(char::to_string));
            continue;
        };
        let last = chars.iter().rposition(|&c| is_word_char(c)).unwrap_or(first);
        out.extend(chars[..first].iter().map(char::to_string));
        out.push(chars[first..=last].iter().collect());
        out.extend(chars[last + 1..].iter().map(char::to_string));
    }
    out
}

fn split_unspaced(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut run = String::new();
        for c in chunk.chars() {
            if is_word_char(c) && !is_unspaced_char(c) {
                run.push(c);
                continue;
            }
            if is_mark(c) && !run.is_empty() {
                run.push(c);
                continue;
            }
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            if is_mark(c) {
                // Attach to the previous single-codepoint token (Thai vowels etc).
                if let Some(prev) = out.last_mut() {
                    prev.push(c);
                    continue;
                }
            }
            out.push(c.to_string());
        }
        if !run.is_empty() {
            out.push(run);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str, lang: &str) -> Vec<String> {
        tokenize(text, lang).into_tokens()
    }

    #[test]
    fn detaches_trailing_punctuation() {
        assert_eq!(toks("the cat sat.", "en"), ["the", "cat", "sat", "."]);
    }

    #[test]
    fn empty_and_blank_input() {
        assert!(toks("", "en").is_empty());
        assert!(toks(" \t\n ", "en").is_empty());
        assert!(toks("", "xx").is_empty());
    }

    #[test]
    fn collapses_repeated_spaces() {
        assert_eq!(toks("A B  C", "en"), ["A", "B", "C"]);
    }

    #[test]
    fn interior_punctuation_stays() {
        assert_eq!(toks("(U.S.) don't", "en"), ["(", "U.S", ".", ")", "don't"]);
        assert_eq!(toks("...", "en"), [".", ".", "."]);
    }

    #[test]
    fn chinese_with_latin_run() {
        assert_eq!(toks("我用Rust写代码。", "zh"), ["我", "用", "Rust", "写", "代", "码", "。"]);
        assert_eq!(tokenize("我用Rust", "zh-CN").warning(), None);
    }

    #[test]
    fn unknown_language_without_spaces_falls_back() {
        let seq = tokenize("abc中文", "qq");
        assert_eq!(seq.tokens(), ["abc", "中", "文"]);
        assert_eq!(seq.warning(), Some(SegmentationWarning::CodepointFallback));

        assert_eq!(tokenize(" 0!a ", "qq").tokens(), ["0", "!", "a"]);

        let spaced = tokenize("hello world", "qq");
        assert_eq!(spaced.tokens(), ["hello", "world"]);
        assert_eq!(spaced.warning(), None);
    }

    #[test]
    fn nfc_is_applied() {
        // "e" + combining acute -> precomposed
        let seq = tokenize("cafe\u{0301}", "fr");
        assert_eq!(seq.tokens(), ["caf\u{e9}"]);
    }

    #[test]
    fn hook_takes_precedence() {
        let tk = Tokenizer::builder()
            .segmenter("zh", |s: &str| {
                vec![s.chars().take(1).collect(), s.chars().skip(1).collect(), String::new()]
            })
            .build();
        let seq = tk.tokenize("我喜欢", "zh-Hans");
        assert_eq!(seq.tokens(), ["我", "喜欢"]);
        assert!(tk.has_hook("ZH"));
    }

    #[test]
    fn pretokenized_roundtrip() {
        let seq = TokenSequence::from_pretokenized(&["我", "喜欢", "猫"], "zh").unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.is_pretokenized());
        let empty = TokenSequence::from_pretokenized::<&str>(&[], "zh").unwrap();
        assert!(empty.is_empty());
        assert_eq!(
            TokenSequence::from_pretokenized(&["a", ""], "en"),
            Err(TokenError::EmptyToken { index: 1 })
        );
    }

    #[test]
    fn thai_marks_attach() {
        let seq = tokenize("กิน", "th");
        assert!(seq.tokens().iter().all(|t| !t.is_empty()));
        assert_eq!(seq.tokens().concat(), "กิน");
    }
}

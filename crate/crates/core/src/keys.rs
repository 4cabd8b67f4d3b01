//! Key-alignment selection: keep only links whose source token is a term.
//!
//! The term decision comes from a [`KeywordLexicon`], either loaded from a
//! file or built from an upstream tagger's per-record `key_src_tokens`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignmentLink, AlignmentSet};
use crate::text::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermTag {
    Noun,
    NamedEntity,
    DomainTerm,
    Other(String),
}

impl From<&str> for TermTag {
    fn from(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "noun" | "n" => Self::Noun,
            "named-entity" | "ne" | "ner" | "entity" => Self::NamedEntity,
            "domain-term" | "term" => Self::DomainTerm,
            _ => Self::Other(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {source_name} has zero entries")]
    Empty { source_name: String },
}

#[derive(Debug, Clone, Default)]
pub struct LexiconOptions {
    pub case_fold: bool,
    /// Split multi-word entries with this language's tokenizer instead of
    /// plain whitespace.
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLexicon {
    entries: BTreeMap<String, Option<TermTag>>,
    case_fold: bool,
    source: String,
}

impl KeywordLexicon {
    /// Lexicon of exact tokens, e.g. from a record's `key_src_tokens`.
    pub fn from_tokens<I, S>(tokens: I, case_fold: bool, source: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = tokens
            .into_iter()
            .filter(|t| !t.as_ref().is_empty())
            .map(|t| (fold(t.as_ref(), case_fold), None))
            .collect();
        Self {
            entries,
            case_fold,
            source: source.to_string(),
        }
    }

    /// Parses lexicon text: one entry per line with an optional `<TAB>tag`;
    /// blank lines and `#` comments are skipped.
    pub fn parse(text: &str, options: &LexiconOptions, source: &str) -> Result<Self, LexiconError> {
        let tokenizer = Tokenizer::default();
        let mut entries = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (term, tag) = match line.split_once('\t') {
                Some((term, tag)) if !tag.trim().is_empty() => (term, Some(TermTag::from(tag))),
                Some((term, _)) => (term, None),
                None => (line, None),
            };
            let parts: Vec<String> = match &options.lang {
                Some(lang) => tokenizer.tokenize(term, lang).into_tokens(),
                None => term.split_whitespace().map(str::to_string).collect(),
            };
            for part in parts {
                entries.entry(fold(&part, options.case_fold)).or_insert_with(|| tag.clone());
            }
        }
        if entries.is_empty() {
            return Err(LexiconError::Empty {
                source_name: source.to_string(),
            });
        }
        Ok(Self {
            entries,
            case_fold: options.case_fold,
            source: source.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn case_fold(&self) -> bool {
        self.case_fold
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tag(&self, token: &str) -> Option<&TermTag> {
        self.entries.get(&fold(token, self.case_fold)).and_then(Option::as_ref)
    }

    pub fn matches(&self, token: &str) -> bool {
        self.entries.contains_key(&fold(token, self.case_fold))
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn fold(s: &str, case_fold: bool) -> String {
    if case_fold {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, options: &LexiconOptions) -> Result<KeywordLexicon, LexiconError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: shown.clone(),
        source,
    })?;
    KeywordLexicon::parse(&text, options, &shown)
}

/// Links of an [`AlignmentSet`] whose source word is in a lexicon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyAlignmentSet {
    set: AlignmentSet,
    lexicon: String,
    /// The lexicon was empty, so nothing could survive.
    empty_lexicon: bool,
}

impl KeyAlignmentSet {
    /// Treats every link as key (no filtering).
    pub fn all(set: AlignmentSet) -> Self {
        Self {
            set,
            lexicon: "all".into(),
            empty_lexicon: false,
        }
    }

    pub fn links(&self) -> &[AlignmentLink] {
        self.set.links()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn as_set(&self) -> &AlignmentSet {
        &self.set
    }

    pub fn lexicon_source(&self) -> &str {
        &self.lexicon
    }

    pub fn empty_lexicon_warning(&self) -> bool {
        self.empty_lexicon
    }
}

pub fn filter_key(alignments: &AlignmentSet, lexicon: &KeywordLexicon) -> KeyAlignmentSet {
    KeyAlignmentSet {
        set: alignments.retain_links(|l| lexicon.matches(&l.src_word)),
        lexicon: lexicon.source.clone(),
        empty_lexicon: lexicon.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenSequence;
    use proptest::prelude::*;

    fn seq(t: &[&str]) -> TokenSequence {
        TokenSequence::from_pretokenized(t, "en").unwrap()
    }

    fn sample() -> AlignmentSet {
        let src = seq(&["the", "cat", "sat"]);
        let tgt = seq(&["die", "Katze", "saß"]);
        AlignmentSet::from_pairs([(0, 0), (1, 1), (2, 2), (1, 0)], &src, &tgt).unwrap()
    }

    #[test]
    fn keeps_only_lexicon_sources() {
        let lex = KeywordLexicon::from_tokens(["cat"], false, "test");
        let keys = filter_key(&sample(), &lex);
        assert_eq!(keys.as_set().pairs().collect::<Vec<_>>(), [(1, 0), (1, 1)]);
        assert!(!keys.empty_lexicon_warning());
    }

    #[test]
    fn empty_lexicon_flags_warning() {
        let lex = KeywordLexicon::from_tokens(Vec::<String>::new(), false, "none");
        let keys = filter_key(&sample(), &lex);
        assert!(keys.is_empty());
        assert!(keys.empty_lexicon_warning());
    }

    #[test]
    fn full_lexicon_is_identity() {
        let lex = KeywordLexicon::from_tokens(["the", "cat", "sat"], false, "all");
        assert_eq!(filter_key(&sample(), &lex).as_set(), &sample());
    }

    #[test]
    fn parse_skips_comments_and_dedups() {
        let opts = LexiconOptions::default();
        assert_eq!(KeywordLexicon::parse("cat\ndog\n# comment\n", &opts, "f").unwrap().len(), 2);
        assert_eq!(KeywordLexicon::parse("cat\ncat", &opts, "f").unwrap().len(), 1);
        let err = KeywordLexicon::parse("", &opts, "f").unwrap_err();
        assert!(err.to_string().contains("zero entries"));
    }

    #[test]
    fn tags_case_folding_and_multiword() {
        let opts = LexiconOptions {
            case_fold: true,
            lang: None,
        };
        let lex = KeywordLexicon::parse("Neural Network\tdomain-term\nParis\tne\n", &opts, "f").unwrap();
        assert!(lex.matches("neural") && lex.matches("NETWORK"));
        assert_eq!(lex.tag("paris"), Some(&TermTag::NamedEntity));
        let zh = LexiconOptions {
            case_fold: false,
            lang: Some("zh".into()),
        };
        let lex = KeywordLexicon::parse("猫咪\n", &zh, "f").unwrap();
        assert_eq!(lex.entries().collect::<Vec<_>>(), ["咪", "猫"]);
    }

    #[test]
    fn load_missing_file() {
        assert!(matches!(
            load_lexicon("/no/such/lexicon.txt", &LexiconOptions::default()),
            Err(LexiconError::Io { .. })
        ));
    }

    fn arb_alignment() -> impl Strategy<Value = AlignmentSet> {
        (1usize..7, 1usize..7).prop_flat_map(|(n, m)| {
            let words = prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), n);
            let pairs = prop::collection::vec((0..n, 0..m), 0..12);
            (words, pairs, Just(m)).prop_map(|(words, pairs, m)| {
                let tgt: Vec<String> = (0..m).map(|j| format!("t{j}")).collect();
                AlignmentSet::from_pairs(pairs, &seq(&words), &TokenSequence::from_pretokenized(&tgt, "de").unwrap())
                    .unwrap()
            })
        })
    }

    fn subset(a: &AlignmentSet, b: &AlignmentSet) -> bool {
        a.links().iter().all(|l| b.links().contains(l))
    }

    proptest! {
        #[test]
        fn filter_properties(
            set in arb_alignment(),
            l1 in prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d"]), 0..4),
            extra in prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d"]), 0..4),
        ) {
            let small = KeywordLexicon::from_tokens(&l1, false, "l1");
            let big = KeywordLexicon::from_tokens(l1.iter().chain(&extra), false, "l2");
            let once = filter_key(&set, &small);
            prop_assert!(subset(once.as_set(), &set));
            prop_assert!(subset(once.as_set(), filter_key(&set, &big).as_set()));
            let twice = filter_key(once.as_set(), &small);
            prop_assert_eq!(twice.as_set(), once.as_set());
            for l in once.links() {
                prop_assert!(small.matches(&l.src_word));
            }
        }
    }
}

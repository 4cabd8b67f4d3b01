//! Corpus metrics: BLEU and terminology accuracy (TA).
//!
//! Both consume already-tokenized sequences, so the evaluation tokenizer is
//! always an explicit choice of the caller.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::ResolvedPolicy;
use crate::text::{TokenSequence, Tokenizer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("reference {index} is empty")]
    EmptyReference { index: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("max_n must be at least 1")]
    BadOrder,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    #[default]
    None,
    /// `(m + 1) / (c + 1)` for orders above 1.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub brevity_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermStats {
    /// Occurrence-level counts (the reported score).
    pub hits: u64,
    pub total: u64,
    /// One count per (record, dictionary entry) with at least one occurrence.
    pub type_hits: u64,
    pub type_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub metric: String,
    /// BLEU in [0, 100]; TA in [0, 1].
    pub value: f64,
    pub sentences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<TermStats>,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and hypothesis n-gram totals per order.
fn sentence_stats(hyp: &[String], reference: &[String], max_n: usize) -> (Vec<u64>, Vec<u64>) {
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    for n in 1..=max_n {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        totals[n - 1] = h.values().sum();
        matches[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    (matches, totals)
}

fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len > ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Corpus BLEU on a 0-100 scale.
///
/// Orders for which the hypothesis side has no n-grams at all (every
/// sentence shorter than `n`) are left out of the geometric mean, so a
/// corpus scored against itself is always 100.
pub fn bleu(hyps: &[TokenSequence], refs: &[TokenSequence], options: BleuOptions) -> Result<CorpusScore, MetricError> {
    if options.max_n == 0 {
        return Err(MetricError::BadOrder);
    }
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if refs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if let Some(index) = refs.iter().position(TokenSequence::is_empty) {
        return Err(MetricError::EmptyReference { index });
    }
    let mut matches = vec![0u64; options.max_n];
    let mut totals = vec![0u64; options.max_n];
    let (mut hyp_len, mut ref_len) = (0u64, 0u64);
    for (h, r) in hyps.iter().zip(refs) {
        let (m, t) = sentence_stats(h.tokens(), r.tokens(), options.max_n);
        for n in 0..options.max_n {
            matches[n] += m[n];
            totals[n] += t[n];
        }
        hyp_len += h.len() as u64;
        ref_len += r.len() as u64;
    }
    let bp = brevity_penalty(hyp_len, ref_len);
    let value = 100.0 * bp * geometric_mean(&matches, &totals, options.smoothing, true);
    Ok(CorpusScore {
        metric: "bleu".into(),
        value,
        sentences: hyps.len(),
        bleu: Some(BleuStats {
            matches,
            totals,
            hyp_len,
            ref_len,
            brevity_penalty: bp,
        }),
        terms: None,
    })
}

fn geometric_mean(matches: &[u64], totals: &[u64], smoothing: Smoothing, skip_empty_orders: bool) -> f64 {
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for (n, (&m, &t)) in matches.iter().zip(totals).enumerate() {
        let p = match smoothing {
            Smoothing::AddOne if n > 0 => (m as f64 + 1.0) / (t as f64 + 1.0),
            _ => {
                if t == 0 && skip_empty_orders {
                    continue;
                }
                if m == 0 {
                    return 0.0;
                }
                m as f64 / t as f64
            }
        };
        log_sum += p.ln();
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    (log_sum / orders as f64).exp()
}

/// Sentence-level BLEU in [0, 1] with add-one smoothing on orders above 1.
pub fn sentence_bleu(hyp: &TokenSequence, reference: &TokenSequence, max_n: usize) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::BadOrder);
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyReference { index: 0 });
    }
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let (matches, totals) = sentence_stats(hyp.tokens(), reference.tokens(), max_n);
    let bp = brevity_penalty(hyp.len() as u64, reference.len() as u64);
    Ok(bp * geometric_mean(&matches, &totals, Smoothing::AddOne, false))
}

#[derive(Debug, Error)]
pub enum TermDictError {
    #[error("cannot read term dictionary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("term dictionary line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("term dictionary has no entries")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermEntry {
    pub source: Vec<String>,
    pub renderings: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDictionary {
    entries: Vec<TermEntry>,
}

impl TermDictionary {
    pub fn new(entries: Vec<TermEntry>) -> Result<Self, TermDictError> {
        if entries.is_empty() {
            return Err(TermDictError::Empty);
        }
        for (i, e) in entries.iter().enumerate() {
            if e.source.is_empty() || e.renderings.is_empty() || e.renderings.iter().any(Vec::is_empty) {
                return Err(TermDictError::Parse {
                    line: i + 1,
                    message: "entries need a non-empty term and at least one non-empty rendering".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Parses `src_term<TAB>rendering[|alt...]` lines; `#` comments and
    /// blank lines are skipped. Terms are tokenized with the given languages.
    pub fn parse(text: &str, tokenizer: &Tokenizer, src_lang: &str, tgt_lang: &str) -> Result<Self, TermDictError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: &str| TermDictError::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let (src, tgt) = line.split_once('\t').ok_or_else(|| err("expected src_term<TAB>rendering"))?;
            let source = tokenizer.tokenize(src, src_lang).into_tokens();
            if source.is_empty() {
                return Err(err("empty source term"));
            }
            let renderings: Vec<Vec<String>> = tgt
                .split('|')
                .map(|r| tokenizer.tokenize(r, tgt_lang).into_tokens())
                .filter(|r| !r.is_empty())
                .collect();
            if renderings.is_empty() {
                return Err(err("no target rendering"));
            }
            entries.push(TermEntry { source, renderings });
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>, tokenizer: &Tokenizer, src_lang: &str, tgt_lang: &str) -> Result<Self, TermDictError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TermDictError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, tokenizer, src_lang, tgt_lang)
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TermAccuracy {
    Score(CorpusScore),
    /// No dictionary term occurs in any source sentence.
    NoTermsFound { sentences: usize },
}

impl TermAccuracy {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Score(s) => Some(s.value),
            Self::NoTermsFound { .. } => None,
        }
    }
}

fn occurrences(haystack: &[String], needle: &[String]) -> u64 {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count() as u64
}

/// Occurrence-level TA: every source-side occurrence of a dictionary term
/// counts once in the denominator and is a hit when any allowed rendering
/// appears contiguously in the hypothesis.
pub fn terminology_accuracy(
    records: &[(TokenSequence, TokenSequence)],
    dict: &TermDictionary,
    policy: &ResolvedPolicy,
) -> TermAccuracy {
    let norm_all = |toks: &[String]| -> Vec<String> { toks.iter().map(|t| policy.norm(t).into_owned()).collect() };
    let entries: Vec<(Vec<String>, Vec<Vec<String>>)> = dict
        .entries
        .iter()
        .map(|e| (norm_all(&e.source), e.renderings.iter().map(|r| norm_all(r)).collect()))
        .collect();
    let mut stats = TermStats {
        hits: 0,
        total: 0,
        type_hits: 0,
        type_total: 0,
    };
    for (src, hyp) in records {
        let src = norm_all(src.tokens());
        let hyp = norm_all(hyp.tokens());
        for (term, renderings) in &entries {
            let occ = occurrences(&src, term);
            if occ == 0 {
                continue;
            }
            let rendered = renderings.iter().any(|r| occurrences(&hyp, r) > 0);
            stats.total += occ;
            stats.type_total += 1;
            if rendered {
                stats.hits += occ;
                stats.type_hits += 1;
            }
        }
    }
    if stats.total == 0 {
        return TermAccuracy::NoTermsFound {
            sentences: records.len(),
        };
    }
    TermAccuracy::Score(CorpusScore {
        metric: "ta".into(),
        value: stats.hits as f64 / stats.total as f64,
        sentences: records.len(),
        bleu: None,
        terms: Some(stats),
    })
}

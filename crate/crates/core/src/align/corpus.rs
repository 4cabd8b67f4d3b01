//! Parallel corpus readers (TSV and JSONL) for aligner training.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::text::{TokenSequence, Tokenizer};

pub type ParallelPair = (TokenSequence, TokenSequence);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `src<TAB>tgt` per line.
    Tsv,
    /// One object per line with `src`/`tgt` strings or `src_tokens`/`tgt_tokens` arrays.
    Jsonl,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.jsonl`/`.json` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => Self::Jsonl,
            _ => Self::Tsv,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("corpus {path} contains no sentence pairs")]
    Empty { path: String },
}

#[derive(Deserialize)]
struct JsonPair {
    src: Option<String>,
    #[serde(alias = "ref")]
    tgt: Option<String>,
    src_tokens: Option<Vec<String>>,
    #[serde(alias = "ref_tokens")]
    tgt_tokens: Option<Vec<String>>,
}

pub fn read_parallel_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    tokenizer: &Tokenizer,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<Vec<ParallelPair>, CorpusError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: shown.clone(),
        source,
    })?;
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let pair = match format {
            CorpusFormat::Tsv => {
                let (s, t) = line
                    .split_once('\t')
                    .ok_or_else(|| parse_err(lineno, "expected src<TAB>tgt".into()))?;
                (tokenizer.tokenize(s, src_lang), tokenizer.tokenize(t, tgt_lang))
            }
            CorpusFormat::Jsonl => {
                let rec: JsonPair = serde_json::from_str(line).map_err(|e| parse_err(lineno, e.to_string()))?;
                let side = |raw: Option<String>, toks: Option<Vec<String>>, lang: &str, name: &str| {
                    match (toks, raw) {
                        (Some(t), _) => TokenSequence::from_pretokenized(&t, lang)
                            .map_err(|e| parse_err(lineno, format!("{name}_tokens: {e}"))),
                        (None, Some(r)) => Ok(tokenizer.tokenize(&r, lang)),
                        (None, None) => Err(parse_err(lineno, format!("missing {name} or {name}_tokens"))),
                    }
                };
                (
                    side(rec.src, rec.src_tokens, src_lang, "src")?,
                    side(rec.tgt, rec.tgt_tokens, tgt_lang, "tgt")?,
                )
            }
        };
        out.push(pair);
    }
    if out.is_empty() {
        return Err(CorpusError::Empty { path: shown });
    }
    Ok(out)
}

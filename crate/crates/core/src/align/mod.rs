//! Word alignment: the `Align(S, X)` relation consumed by the rewards.
//!
//! Alignments come either from an external aligner (Pharaoh `i-j` lines) or
//! from the built-in IBM Model 1/2 aligner trained with EM.

mod corpus;
mod ibm;
mod pharaoh;
mod symmetrize;
mod table_io;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::TokenSequence;

pub use corpus::{read_parallel_corpus, CorpusError, CorpusFormat, ParallelPair};
pub use ibm::{align, em_train, AlignMode, AlignModel, AlignOutcome, LexicalModel, TrainReport, TranslationTable};
pub use pharaoh::{format_pharaoh, parse_pharaoh, PharaohError};
pub use symmetrize::grow_diag_final;
pub use table_io::{load_table, read_table, save_table, write_table, TableIoError, TABLE_MAGIC, TABLE_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("link ({src_idx}, {tgt_idx}) out of range for {src_len}x{tgt_len} sentence pair")]
    OutOfRange {
        src_idx: usize,
        tgt_idx: usize,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("every sentence pair in the corpus has an empty side")]
    NoUsablePairs,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AlignmentLink {
    pub src_idx: usize,
    pub tgt_idx: usize,
    pub src_word: String,
    pub tgt_word: String,
}

/// A deduplicated set of links, kept sorted by `(src_idx, tgt_idx)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSet {
    links: Vec<AlignmentLink>,
    src_len: usize,
    tgt_len: usize,
}

impl AlignmentSet {
    pub fn empty(src_len: usize, tgt_len: usize) -> Self {
        Self {
            links: Vec::new(),
            src_len,
            tgt_len,
        }
    }

    /// Builds a set from index pairs, resolving surface forms from the sequences.
    pub fn from_pairs<I>(pairs: I, src: &TokenSequence, tgt: &TokenSequence) -> Result<Self, AlignError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut seen = BTreeSet::new();
        for (i, j) in pairs {
            if i >= src.len() || j >= tgt.len() {
                return Err(AlignError::OutOfRange {
                    src_idx: i,
                    tgt_idx: j,
                    src_len: src.len(),
                    tgt_len: tgt.len(),
                });
            }
            seen.insert((i, j));
        }
        let links = seen
            .into_iter()
            .map(|(i, j)| AlignmentLink {
                src_idx: i,
                tgt_idx: j,
                src_word: src.tokens()[i].clone(),
                tgt_word: tgt.tokens()[j].clone(),
            })
            .collect();
        Ok(Self {
            links,
            src_len: src.len(),
            tgt_len: tgt.len(),
        })
    }

    /// Keeps the links accepted by `keep`; used by key filtering.
    pub(crate) fn retain_links(&self, mut keep: impl FnMut(&AlignmentLink) -> bool) -> Self {
        Self {
            links: self.links.iter().filter(|l| keep(l)).cloned().collect(),
            src_len: self.src_len,
            tgt_len: self.tgt_len,
        }
    }

    /// Builds directly from links. Links are sorted and deduplicated; range
    /// and surface-form consistency are the caller's responsibility.
    pub fn from_links(mut links: Vec<AlignmentLink>, src_len: usize, tgt_len: usize) -> Self {
        links.sort();
        links.dedup_by(|a, b| a.src_idx == b.src_idx && a.tgt_idx == b.tgt_idx);
        Self {
            links,
            src_len,
            tgt_len,
        }
    }

    pub fn links(&self) -> &[AlignmentLink] {
        &self.links
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn tgt_len(&self) -> usize {
        self.tgt_len
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().map(|l| (l.src_idx, l.tgt_idx))
    }

    pub fn contains(&self, src_idx: usize, tgt_idx: usize) -> bool {
        self.links
            .binary_search_by(|l| (l.src_idx, l.tgt_idx).cmp(&(src_idx, tgt_idx)))
            .is_ok()
    }
}

//! IBM Model 1/2 lexical translation tables trained by EM.
//!
//! A [`TranslationTable`] holds one [`LexicalModel`] per direction so that the
//! grow-diag-final symmetrization has both argmax alignments available.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::symmetrize::grow_diag_final;
use super::{AlignError, AlignmentLink, AlignmentSet};
use crate::text::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignModel {
    Ibm1,
    Ibm2,
}

impl std::str::FromStr for AlignModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ibm1" | "1" => Ok(Self::Ibm1),
            "ibm2" | "2" => Ok(Self::Ibm2),
            other => Err(format!("unknown alignment model {other:?} (expected ibm1 or ibm2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    Argmax,
    #[default]
    GrowDiag,
}

impl std::str::FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "argmax" => Ok(Self::Argmax),
            "grow-diag" | "grow-diag-final" => Ok(Self::GrowDiag),
            other => Err(format!("unknown alignment mode {other:?} (expected argmax or grow-diag)")),
        }
    }
}

/// Key of the IBM2 distortion table: (target position, source length, target length).
pub(crate) type DistortionKey = (u32, u32, u32);

/// `t(target | source)` for one direction, plus the optional IBM2 distortion table.
///
/// Rows are stored sparsely as `(target id, prob)` sorted by id. The NULL source
/// has its own row and is not part of the source vocabulary.
#[derive(Debug, Clone, Default)]
pub struct LexicalModel {
    pub(crate) src_vocab: Vec<String>,
    pub(crate) tgt_vocab: Vec<String>,
    pub(crate) rows: Vec<Vec<(u32, f64)>>,
    pub(crate) null_row: Vec<(u32, f64)>,
    /// Values indexed by source position, 0 = NULL, 1..=l = real words.
    pub(crate) distortion: BTreeMap<DistortionKey, Vec<f64>>,
    src_index: HashMap<String, u32>,
    tgt_index: HashMap<String, u32>,
}

impl PartialEq for LexicalModel {
    fn eq(&self, other: &Self) -> bool {
        fn bits(row: &[(u32, f64)]) -> impl Iterator<Item = (u32, u64)> + '_ {
            row.iter().map(|&(id, p)| (id, p.to_bits()))
        }
        self.src_vocab == other.src_vocab
            && self.tgt_vocab == other.tgt_vocab
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| bits(a).eq(bits(b)))
            && bits(&self.null_row).eq(bits(&other.null_row))
            && self.distortion.len() == other.distortion.len()
            && self.distortion.iter().zip(&other.distortion).all(|((ka, va), (kb, vb))| {
                ka == kb && va.iter().map(|p| p.to_bits()).eq(vb.iter().map(|p| p.to_bits()))
            })
    }
}

impl LexicalModel {
    pub(crate) fn from_parts(
        src_vocab: Vec<String>,
        tgt_vocab: Vec<String>,
        rows: Vec<Vec<(u32, f64)>>,
        null_row: Vec<(u32, f64)>,
        distortion: BTreeMap<DistortionKey, Vec<f64>>,
    ) -> Self {
        let src_index = index_of(&src_vocab);
        let tgt_index = index_of(&tgt_vocab);
        Self {
            src_vocab,
            tgt_vocab,
            rows,
            null_row,
            distortion,
            src_index,
            tgt_index,
        }
    }

    pub fn src_vocab(&self) -> &[String] {
        &self.src_vocab
    }

    pub fn tgt_vocab(&self) -> &[String] {
        &self.tgt_vocab
    }

    pub fn src_id(&self, word: &str) -> Option<u32> {
        self.src_index.get(word).copied()
    }

    pub fn tgt_id(&self, word: &str) -> Option<u32> {
        self.tgt_index.get(word).copied()
    }

    pub fn has_distortion(&self) -> bool {
        !self.distortion.is_empty()
    }

    /// `t(tgt | src)`; `src = None` is the NULL word. Unknown words give 0.
    pub fn prob(&self, src: Option<&str>, tgt: &str) -> f64 {
        let Some(t) = self.tgt_id(tgt) else { return 0.0 };
        match src {
            None => row_lookup(&self.null_row, t),
            Some(s) => self
                .src_id(s)
                .map_or(0.0, |s| row_lookup(&self.rows[s as usize], t)),
        }
    }

    fn prob_ids(&self, src: Option<u32>, tgt: u32) -> f64 {
        match src {
            None => row_lookup(&self.null_row, tgt),
            Some(s) => row_lookup(&self.rows[s as usize], tgt),
        }
    }

    /// Alignment probability of source position `i` (0 = NULL) for target
    /// position `j`; uniform when no distortion table is present.
    pub fn distortion(&self, i: usize, j: usize, src_len: usize, tgt_len: usize) -> f64 {
        let key = (j as u32, src_len as u32, tgt_len as u32);
        match self.distortion.get(&key) {
            Some(v) => v.get(i).copied().unwrap_or(0.0),
            None => 1.0 / (src_len as f64 + 1.0),
        }
    }

    /// Largest `|sum_f t(f|e) - 1|` over all non-empty rows including NULL.
    pub fn max_row_deviation(&self) -> f64 {
        self.rows
            .iter()
            .chain(std::iter::once(&self.null_row))
            .filter(|r| !r.is_empty())
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn identity(words: &[String]) -> Self {
        let mut vocab: Vec<String> = Vec::new();
        for w in words {
            if !vocab.contains(w) {
                vocab.push(w.clone());
            }
        }
        let rows = (0..vocab.len() as u32).map(|i| vec![(i, 1.0)]).collect();
        Self::from_parts(vocab.clone(), vocab, rows, Vec::new(), BTreeMap::new())
    }

    /// Best source position for each target token under this direction.
    fn argmax_links(&self, src: &[String], tgt: &[String]) -> Vec<(usize, usize)> {
        let src_ids: Vec<Option<u32>> = src.iter().map(|w| self.src_id(w)).collect();
        let (l, m) = (src.len(), tgt.len());
        let mut out = Vec::new();
        for (j, word) in tgt.iter().enumerate() {
            let Some(f) = self.tgt_id(word) else { continue };
            let null_score = self.prob_ids(None, f) * self.distortion(0, j, l, m);
            let mut best: Option<(usize, f64)> = None;
            for (i, id) in src_ids.iter().enumerate() {
                let Some(e) = *id else { continue };
                let score = self.prob_ids(Some(e), f) * self.distortion(i + 1, j, l, m);
                if score > best.map_or(0.0, |(_, s)| s) {
                    best = Some((i, score));
                }
            }
            // Real words win ties against NULL.
            if let Some((i, score)) = best {
                if score >= null_score {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn index_of(vocab: &[String]) -> HashMap<String, u32> {
    vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect()
}

fn row_lookup(row: &[(u32, f64)], id: u32) -> f64 {
    row.binary_search_by_key(&id, |&(k, _)| k)
        .map_or(0.0, |pos| row[pos].1)
}

/// Source-to-target and target-to-source lexical models.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTable {
    pub model: AlignModel,
    pub forward: LexicalModel,
    pub reverse: LexicalModel,
}

impl TranslationTable {
    pub fn empty() -> Self {
        Self {
            model: AlignModel::Ibm1,
            forward: LexicalModel::default(),
            reverse: LexicalModel::default(),
        }
    }

    /// `t(w | w) = 1` for every listed word, in both directions.
    pub fn identity<S: AsRef<str>>(words: &[S]) -> Self {
        let words: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
        Self {
            model: AlignModel::Ibm1,
            forward: LexicalModel::identity(&words),
            reverse: LexicalModel::identity(&words),
        }
    }

    /// Forward-direction `t(tgt | src)`.
    pub fn prob(&self, src: &str, tgt: &str) -> f64 {
        self.forward.prob(Some(src), tgt)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub table: TranslationTable,
    /// Forward-direction corpus log-likelihood after each iteration.
    pub log_likelihood: Vec<f64>,
    pub reverse_log_likelihood: Vec<f64>,
    /// Pairs skipped because one side was empty.
    pub skipped_pairs: usize,
}

struct Encoded {
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
}

fn encode<'a, I>(pairs: I) -> Encoded
where
    I: Iterator<Item = (&'a [String], &'a [String])>,
{
    let mut src_vocab = Vec::new();
    let mut tgt_vocab = Vec::new();
    let mut src_index: HashMap<&'a str, u32> = HashMap::new();
    let mut tgt_index: HashMap<&'a str, u32> = HashMap::new();
    let mut encoded = Vec::new();
    for (src, tgt) in pairs {
        let intern = |words: &'a [String], vocab: &mut Vec<String>, index: &mut HashMap<&'a str, u32>| {
            words
                .iter()
                .map(|w| {
                    *index.entry(w.as_str()).or_insert_with(|| {
                        vocab.push(w.clone());
                        (vocab.len() - 1) as u32
                    })
                })
                .collect::<Vec<u32>>()
        };
        let s = intern(src, &mut src_vocab, &mut src_index);
        let t = intern(tgt, &mut tgt_vocab, &mut tgt_index);
        encoded.push((s, t));
    }
    Encoded {
        src_vocab,
        tgt_vocab,
        pairs: encoded,
    }
}

/// Trains IBM Model 1 (or 2) in both directions.
///
/// Initialization is uniform over co-occurring word pairs; the IBM2
/// distortion table starts uniform, so its first iteration matches IBM1.
pub fn em_train(
    corpus: &[(TokenSequence, TokenSequence)],
    iterations: usize,
    model: AlignModel,
) -> Result<TrainReport, AlignError> {
    if corpus.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(AlignError::ZeroIterations);
    }
    let usable: Vec<(&[String], &[String])> = corpus
        .iter()
        .filter(|(s, t)| !s.is_empty() && !t.is_empty())
        .map(|(s, t)| (s.tokens(), t.tokens()))
        .collect();
    let skipped_pairs = corpus.len() - usable.len();
    if usable.is_empty() {
        return Err(AlignError::NoUsablePairs);
    }

    let fwd = encode(usable.iter().copied());
    let rev = encode(usable.iter().map(|&(s, t)| (t, s)));
    let (forward, log_likelihood) = train_direction(fwd, iterations, model);
    let (reverse, reverse_log_likelihood) = train_direction(rev, iterations, model);
    Ok(TrainReport {
        table: TranslationTable {
            model,
            forward,
            reverse,
        },
        log_likelihood,
        reverse_log_likelihood,
        skipped_pairs,
    })
}

fn train_direction(data: Encoded, iterations: usize, model: AlignModel) -> (LexicalModel, Vec<f64>) {
    let n_src = data.src_vocab.len();
    // Row index n_src is NULL.
    let mut t: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n_src + 1];
    for (src, tgt) in &data.pairs {
        for &e in src.iter().chain(std::iter::once(&(n_src as u32))) {
            for &f in tgt {
                t[e as usize].insert(f, 0.0);
            }
        }
    }
    for row in &mut t {
        let uniform = 1.0 / row.len() as f64;
        row.values_mut().for_each(|p| *p = uniform);
    }
    let mut distortion: BTreeMap<DistortionKey, Vec<f64>> = BTreeMap::new();
    if model == AlignModel::Ibm2 {
        for (src, tgt) in &data.pairs {
            let (l, m) = (src.len(), tgt.len());
            for j in 0..m {
                distortion
                    .entry((j as u32, l as u32, m as u32))
                    .or_insert_with(|| vec![1.0 / (l as f64 + 1.0); l + 1]);
            }
        }
    }

    let mut history = Vec::with_capacity(iterations);
    let mut probs: Vec<f64> = Vec::new();
    for iter in 0..=iterations {
        let mut counts: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n_src + 1];
        let mut totals = vec![0.0f64; n_src + 1];
        let mut dist_counts: BTreeMap<DistortionKey, Vec<f64>> = BTreeMap::new();
        let mut ll = 0.0;
        for (src, tgt) in &data.pairs {
            let (l, m) = (src.len(), tgt.len());
            let uniform_a = 1.0 / (l as f64 + 1.0);
            for (j, &f) in tgt.iter().enumerate() {
                let key = (j as u32, l as u32, m as u32);
                let a = distortion.get(&key);
                probs.clear();
                probs.push(t[n_src][&f] * a.map_or(uniform_a, |v| v[0]));
                for (i, &e) in src.iter().enumerate() {
                    probs.push(t[e as usize][&f] * a.map_or(uniform_a, |v| v[i + 1]));
                }
                let z: f64 = probs.iter().sum();
                ll += z.ln();
                if iter == iterations {
                    continue;
                }
                let dc = (model == AlignModel::Ibm2)
                    .then(|| dist_counts.entry(key).or_insert_with(|| vec![0.0; l + 1]));
                let mut dc = dc;
                for (pos, &p) in probs.iter().enumerate() {
                    let delta = p / z;
                    let e = if pos == 0 { n_src } else { src[pos - 1] as usize };
                    *counts[e].entry(f).or_insert(0.0) += delta;
                    totals[e] += delta;
                    if let Some(dc) = dc.as_deref_mut() {
                        dc[pos] += delta;
                    }
                }
            }
        }
        if iter > 0 {
            history.push(ll);
        }
        if iter == iterations {
            break;
        }
        for (e, row) in counts.into_iter().enumerate() {
            let total = totals[e];
            for (f, c) in row {
                t[e].insert(f, c / total);
            }
        }
        for (key, c) in dist_counts {
            let sum: f64 = c.iter().sum();
            distortion.insert(key, c.into_iter().map(|x| x / sum).collect());
        }
    }

    let sorted = |row: &HashMap<u32, f64>| {
        let mut v: Vec<(u32, f64)> = row.iter().map(|(&k, &p)| (k, p)).collect();
        v.sort_by_key(|&(k, _)| k);
        v
    };
    let null_row = sorted(&t[n_src]);
    let rows = t[..n_src].iter().map(sorted).collect();
    let lexical = LexicalModel::from_parts(data.src_vocab, data.tgt_vocab, rows, null_row, distortion);
    (lexical, history)
}

/// Result of aligning one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignOutcome {
    pub set: AlignmentSet,
    /// Source plus target tokens missing from the forward vocabulary.
    pub oov: usize,
}

pub fn align(table: &TranslationTable, src: &TokenSequence, tgt: &TokenSequence, mode: AlignMode) -> AlignOutcome {
    let fwd = &table.forward;
    let oov = src.tokens().iter().filter(|w| fwd.src_id(w).is_none()).count()
        + tgt.tokens().iter().filter(|w| fwd.tgt_id(w).is_none()).count();
    if src.is_empty() || tgt.is_empty() {
        return AlignOutcome {
            set: AlignmentSet::empty(src.len(), tgt.len()),
            oov,
        };
    }
    let s2t = fwd.argmax_links(src.tokens(), tgt.tokens());
    let pairs = match mode {
        AlignMode::Argmax => s2t,
        AlignMode::GrowDiag => {
            let t2s: Vec<(usize, usize)> = table
                .reverse
                .argmax_links(tgt.tokens(), src.tokens())
                .into_iter()
                .map(|(j, i)| (i, j))
                .collect();
            grow_diag_final(src.len(), tgt.len(), &s2t, &t2s)
        }
    };
    let links = pairs
        .into_iter()
        .map(|(i, j)| AlignmentLink {
            src_idx: i,
            tgt_idx: j,
            src_word: src.tokens()[i].clone(),
            tgt_word: tgt.tokens()[j].clone(),
        })
        .collect();
    AlignOutcome {
        set: AlignmentSet::from_links(links, src.len(), tgt.len()),
        oov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn pair(s: &str, t: &str) -> (TokenSequence, TokenSequence) {
        (tokenize(s, "de"), tokenize(t, "en"))
    }

    fn toy() -> Vec<(TokenSequence, TokenSequence)> {
        vec![
            pair("das haus", "the house"),
            pair("das buch", "the book"),
            pair("ein buch", "a book"),
        ]
    }

    #[test]
    fn single_pair_single_word() {
        let report = em_train(&[pair("a", "b")], 1, AlignModel::Ibm1).unwrap();
        assert!((report.table.prob("a", "b") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(em_train(&[], 3, AlignModel::Ibm1).unwrap_err(), AlignError::EmptyCorpus);
        assert_eq!(em_train(&toy(), 0, AlignModel::Ibm1).unwrap_err(), AlignError::ZeroIterations);
        assert_eq!(
            em_train(&[pair("", "x")], 1, AlignModel::Ibm1).unwrap_err(),
            AlignError::NoUsablePairs
        );
    }

    #[test]
    fn skips_pairs_with_empty_side() {
        let mut corpus = toy();
        corpus.push(pair("", "orphan"));
        let report = em_train(&corpus, 2, AlignModel::Ibm1).unwrap();
        assert_eq!(report.skipped_pairs, 1);
        assert_eq!(report.table.forward.tgt_id("orphan"), None);
    }

    #[test]
    fn toy_corpus_converges() {
        let report = em_train(&toy(), 10, AlignModel::Ibm1).unwrap();
        let t = &report.table;
        assert!(t.prob("das", "the") > t.prob("das", "house"));
        assert!(t.prob("buch", "book") > 0.9);
        assert_eq!(report.log_likelihood.len(), 10);
        for w in report.log_likelihood.windows(2) {
            assert!(w[1] >= w[0], "{:?}", report.log_likelihood);
        }
        assert!(t.forward.max_row_deviation() < 1e-9);
        assert!(t.reverse.max_row_deviation() < 1e-9);
    }

    #[test]
    fn ibm2_is_monotone_and_stochastic() {
        let report = em_train(&toy(), 8, AlignModel::Ibm2).unwrap();
        for w in report.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let fwd = &report.table.forward;
        assert!(fwd.has_distortion());
        for v in fwd.distortion.values() {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn toy_alignment_argmax_and_grow_diag() {
        let table = em_train(&toy(), 10, AlignModel::Ibm1).unwrap().table;
        let (s, t) = pair("das buch", "the book");
        for mode in [AlignMode::Argmax, AlignMode::GrowDiag] {
            let out = align(&table, &s, &t, mode);
            assert_eq!(out.set.pairs().collect::<Vec<_>>(), [(0, 0), (1, 1)], "{mode:?}");
            assert_eq!(out.oov, 0);
        }
    }

    #[test]
    fn empty_table_aligns_nothing() {
        let out = align(
            &TranslationTable::empty(),
            &tokenize("x", "en"),
            &tokenize("y", "en"),
            AlignMode::Argmax,
        );
        assert!(out.set.is_empty());
        assert_eq!(out.oov, 2);
    }

    #[test]
    fn identity_table_gives_diagonal() {
        let words = ["alpha", "beta", "gamma", "delta"];
        let table = TranslationTable::identity(&words);
        let seq = TokenSequence::from_pretokenized(&words, "en").unwrap();
        for mode in [AlignMode::Argmax, AlignMode::GrowDiag] {
            let out = align(&table, &seq, &seq, mode);
            assert_eq!(out.set.pairs().collect::<Vec<_>>(), [(0, 0), (1, 1), (2, 2), (3, 3)]);
        }
    }
}

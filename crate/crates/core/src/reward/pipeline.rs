//! Record scoring: parse, tokenize, align, select keys, score, combine.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::combine::{combine, ComponentValues, Diagnostics, RewardBreakdown, RewardWeights};
use super::components::{reward_aao, reward_aaw, reward_bleu, reward_taw};
use super::format::{parse_output, FormatMode, ParsedOutput};
use super::scorer::{ConstantScorer, ScoreItem, ScorerError, SemanticScorer};
use super::RewardError;
use crate::align::{align, load_table, parse_pharaoh, AlignMode, AlignmentSet, PharaohError, TableIoError, TranslationTable};
use crate::config::{AlignmentSource, KeySource, LanguagePair, Recipe, RewardConfig, ScorerBinding};
use crate::keys::{filter_key, load_lexicon, KeyAlignmentSet, KeywordLexicon, LexiconError, LexiconOptions};
use crate::policy::MatchPolicy;
use crate::text::{TokenError, TokenSequence, Tokenizer};

/// One line of a scoring input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoringRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Precomputed raw semantic score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_pre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_src_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_tgt: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("record is missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}`: {source}")]
    Token {
        field: &'static str,
        #[source]
        source: TokenError,
    },
    #[error("field `{field}`: {source}")]
    Alignment {
        field: &'static str,
        #[source]
        source: PharaohError,
    },
    #[error("sidecar {which} alignment has no line for record {index}")]
    SidecarMissing { which: &'static str, index: usize },
    #[error("binding is precomputed but the record has no finite `comet` value")]
    MissingComet,
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Table(#[from] TableIoError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("cannot read alignment sidecar {path}: {source}")]
    Sidecar {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("recipe {0} needs an alignment source")]
    NoAlignment(Recipe),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Per-request knobs that may differ from the loaded config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSettings {
    pub recipe: Recipe,
    pub weights: RewardWeights,
    pub matching: MatchPolicy,
    pub format: FormatMode,
    pub languages: LanguagePair,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreOverrides {
    #[serde(default)]
    pub recipe: Option<Recipe>,
    #[serde(default)]
    pub weights: Option<RewardWeights>,
    #[serde(default)]
    pub matching: Option<MatchPolicy>,
    #[serde(default)]
    pub format: Option<FormatMode>,
}

impl ScoreSettings {
    pub fn from_config(config: &RewardConfig) -> Self {
        Self {
            recipe: config.recipe,
            weights: config.weights,
            matching: config.matching,
            format: config.format,
            languages: config.languages.clone(),
        }
    }

    pub fn apply(&self, overrides: &ScoreOverrides) -> Result<Self, RewardError> {
        let out = Self {
            recipe: overrides.recipe.unwrap_or(self.recipe),
            weights: overrides.weights.unwrap_or(self.weights),
            matching: overrides.matching.unwrap_or(self.matching),
            format: overrides.format.unwrap_or(self.format),
            languages: self.languages.clone(),
        };
        out.weights.validate()?;
        Ok(out)
    }
}

enum Alignments {
    None,
    Record,
    Table { table: TranslationTable, mode: AlignMode },
    Sidecar { reference: Vec<String>, predicted: Vec<String> },
}

enum Keys {
    All,
    Lexicon(KeywordLexicon),
}

enum Semantic {
    Scorer(Arc<dyn SemanticScorer>),
    Precomputed,
    /// Endpoint binding with no client attached yet.
    Detached,
}

/// Immutable scoring state: tokenizer, alignment source, key lexicon and
/// semantic scorer. Safe to share across threads.
pub struct Engine {
    settings: ScoreSettings,
    tokenizer: Tokenizer,
    alignments: Alignments,
    keys: Keys,
    semantic: Semantic,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|source| EngineError::Sidecar {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

struct Prepared {
    parsed: ParsedOutput,
    src: String,
    reference: String,
    lang_src: String,
    lang_tgt: String,
}

impl Engine {
    /// Loads every resource the config names; relative paths resolve
    /// against `base_dir`.
    pub fn load(config: &RewardConfig, base_dir: &Path) -> Result<Self, EngineError> {
        Self::with_tokenizer(config, base_dir, Tokenizer::default())
    }

    pub fn with_tokenizer(config: &RewardConfig, base_dir: &Path, tokenizer: Tokenizer) -> Result<Self, EngineError> {
        let alignments = match &config.alignment {
            None => Alignments::None,
            Some(AlignmentSource::Record) => Alignments::Record,
            Some(AlignmentSource::Table { path, mode }) => Alignments::Table {
                table: load_table(resolve(base_dir, path))?,
                mode: *mode,
            },
            Some(AlignmentSource::Sidecar { ref_path, pre_path }) => Alignments::Sidecar {
                reference: read_lines(&resolve(base_dir, ref_path))?,
                predicted: read_lines(&resolve(base_dir, pre_path))?,
            },
        };
        let keys = match &config.keys {
            KeySource::All => Keys::All,
            KeySource::Lexicon { path, case_fold, lang } => {
                let options = LexiconOptions {
                    case_fold: *case_fold,
                    lang: lang.clone(),
                };
                Keys::Lexicon(load_lexicon(resolve(base_dir, path), &options)?)
            }
        };
        let semantic = match &config.scorer {
            ScorerBinding::Mock(v) => Semantic::Scorer(Arc::new(ConstantScorer::new(*v))),
            ScorerBinding::Precomputed => Semantic::Precomputed,
            ScorerBinding::Endpoint(_) => Semantic::Detached,
        };
        Self::assemble(ScoreSettings::from_config(config), tokenizer, alignments, keys, semantic, config.service.parallelism)
    }

    fn assemble(
        settings: ScoreSettings,
        tokenizer: Tokenizer,
        alignments: Alignments,
        keys: Keys,
        semantic: Semantic,
        parallelism: usize,
    ) -> Result<Self, EngineError> {
        if settings.recipe.needs_alignment() && matches!(alignments, Alignments::None) {
            return Err(EngineError::NoAlignment(settings.recipe));
        }
        #[cfg(not(feature = "parallel"))]
        let _ = parallelism;
        Ok(Self {
            settings,
            tokenizer,
            alignments,
            keys,
            semantic,
            #[cfg(feature = "parallel")]
            pool: rayon::ThreadPoolBuilder::new()
                .num_threads(parallelism.max(1))
                .build()
                .map_err(|e| EngineError::Threads(e.to_string()))?,
        })
    }

    /// Attaches the client used for an endpoint binding (or replaces the scorer).
    pub fn with_scorer(mut self, scorer: Arc<dyn SemanticScorer>) -> Self {
        self.semantic = Semantic::Scorer(scorer);
        self
    }

    pub fn settings(&self) -> &ScoreSettings {
        &self.settings
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn has_table(&self) -> bool {
        matches!(self.alignments, Alignments::Table { .. })
    }

    pub fn lexicon(&self) -> Option<&KeywordLexicon> {
        match &self.keys {
            Keys::Lexicon(l) => Some(l),
            Keys::All => None,
        }
    }

    pub fn scorer(&self) -> Option<&Arc<dyn SemanticScorer>> {
        match &self.semantic {
            Semantic::Scorer(s) => Some(s),
            _ => None,
        }
    }

    /// Whether records need a live scorer (as opposed to precomputed scores).
    pub fn needs_live_scorer(&self) -> bool {
        !matches!(self.semantic, Semantic::Precomputed)
    }

    pub fn score_record(&self, record: &ScoringRecord, index: usize) -> Result<Result<RewardBreakdown, RecordError>, ScorerError> {
        let mut out = self.score_batch_with(std::slice::from_ref(record), index, &self.settings)?;
        Ok(out.pop().expect("one record in, one result out").0)
    }

    /// Scores records in order. `first_index` is the position of the first
    /// record in the overall input (used for sidecar lookups). A scorer
    /// failure fails the whole batch; every other problem is per record.
    pub fn score_batch(
        &self,
        records: &[ScoringRecord],
        first_index: usize,
    ) -> Result<Vec<Result<RewardBreakdown, RecordError>>, ScorerError> {
        Ok(self
            .score_batch_with(records, first_index, &self.settings)?
            .into_iter()
            .map(|(r, _)| r)
            .collect())
    }

    /// Like [`Engine::score_batch`] with explicit settings; also returns the
    /// wall time attributed to each record (its own work plus an equal share
    /// of the semantic-scorer call).
    pub fn score_batch_with(
        &self,
        records: &[ScoringRecord],
        first_index: usize,
        settings: &ScoreSettings,
    ) -> Result<Vec<(Result<RewardBreakdown, RecordError>, Duration)>, ScorerError> {
        let started = Instant::now();
        if settings.recipe.needs_alignment() && matches!(self.alignments, Alignments::None) {
            return Err(ScorerError::Protocol(format!(
                "recipe {} needs an alignment source but none is configured",
                settings.recipe
            )));
        }
        let prepared: Vec<Result<Prepared, RecordError>> = records.iter().map(|r| self.prepare(r, settings)).collect();
        let live: Vec<usize> = prepared
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Ok(p) if p.parsed.format_ok))
            .map(|(i, _)| i)
            .collect();
        let mut comet: Vec<Option<Result<f64, RecordError>>> = vec![None; records.len()];
        match &self.semantic {
            Semantic::Precomputed => {
                for &i in &live {
                    comet[i] = Some(records[i].comet.filter(|c| c.is_finite()).ok_or(RecordError::MissingComet));
                }
            }
            Semantic::Detached if !live.is_empty() => {
                return Err(ScorerError::Unavailable("no scorer client attached for the endpoint binding".into()));
            }
            Semantic::Detached => {}
            Semantic::Scorer(scorer) if !live.is_empty() => {
                let items: Vec<ScoreItem> = live
                    .iter()
                    .map(|&i| {
                        let p = prepared[i].as_ref().expect("live records are prepared");
                        ScoreItem {
                            src: p.src.clone(),
                            reference: Some(p.reference.clone()),
                            hyp: p.parsed.answer.clone(),
                        }
                    })
                    .collect();
                let scores = scorer.score(&items)?;
                if scores.len() != items.len() {
                    return Err(ScorerError::Protocol(format!("{} scores for {} items", scores.len(), items.len())));
                }
                for (&i, s) in live.iter().zip(scores) {
                    if !s.is_finite() {
                        return Err(ScorerError::Protocol(format!("non-finite score {s}")));
                    }
                    comet[i] = Some(Ok(s));
                }
            }
            Semantic::Scorer(_) => {}
        }
        let shared = started.elapsed() / records.len().max(1) as u32;
        let jobs: Vec<(usize, Result<Prepared, RecordError>, Option<Result<f64, RecordError>>)> = prepared
            .into_iter()
            .zip(comet)
            .enumerate()
            .map(|(i, (p, c))| (i, p, c))
            .collect();
        let run = |(i, p, c): (usize, Result<Prepared, RecordError>, Option<Result<f64, RecordError>>)| {
            let t = Instant::now();
            let result = p.and_then(|p| self.finish(&records[i], first_index + i, p, c, settings));
            (result, t.elapsed() + shared)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok(self.pool.install(|| jobs.into_par_iter().map(run).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(jobs.into_iter().map(run).collect())
        }
    }

    fn prepare(&self, record: &ScoringRecord, settings: &ScoreSettings) -> Result<Prepared, RecordError> {
        let output = record.output.as_deref().ok_or(RecordError::MissingField("output"))?;
        let src = record.src.clone().ok_or(RecordError::MissingField("src"))?;
        let reference = record.reference.clone().ok_or(RecordError::MissingField("ref"))?;
        Ok(Prepared {
            parsed: parse_output(output, settings.format),
            src,
            reference,
            lang_src: record.lang_src.clone().unwrap_or_else(|| settings.languages.src.clone()),
            lang_tgt: record.lang_tgt.clone().unwrap_or_else(|| settings.languages.tgt.clone()),
        })
    }

    fn sequence(
        &self,
        pre: Option<&Vec<String>>,
        text: &str,
        lang: &str,
        field: &'static str,
    ) -> Result<TokenSequence, RecordError> {
        match pre {
            Some(tokens) => TokenSequence::from_pretokenized(tokens, lang).map_err(|source| RecordError::Token { field, source }),
            None => Ok(self.tokenizer.tokenize(text, lang)),
        }
    }

    fn alignment_pair(
        &self,
        record: &ScoringRecord,
        index: usize,
        src: &TokenSequence,
        reference: &TokenSequence,
        hyp: &TokenSequence,
    ) -> Result<(AlignmentSet, AlignmentSet, usize), RecordError> {
        let pharaoh = |line: &str, tgt: &TokenSequence, field: &'static str| {
            parse_pharaoh(line, src, tgt).map_err(|source| RecordError::Alignment { field, source })
        };
        match &self.alignments {
            Alignments::None => unreachable!("checked before scoring"),
            Alignments::Record => {
                let r = record.align_ref.as_deref().ok_or(RecordError::MissingField("align_ref"))?;
                let p = record.align_pre.as_deref().ok_or(RecordError::MissingField("align_pre"))?;
                Ok((pharaoh(r, reference, "align_ref")?, pharaoh(p, hyp, "align_pre")?, 0))
            }
            Alignments::Table { table, mode } => {
                let r = align(table, src, reference, *mode);
                let p = align(table, src, hyp, *mode);
                Ok((r.set, p.set, r.oov + p.oov))
            }
            Alignments::Sidecar { reference: rl, predicted: pl } => {
                let r = rl.get(index).ok_or(RecordError::SidecarMissing { which: "reference", index })?;
                let p = pl.get(index).ok_or(RecordError::SidecarMissing { which: "prediction", index })?;
                Ok((pharaoh(r, reference, "sidecar reference")?, pharaoh(p, hyp, "sidecar prediction")?, 0))
            }
        }
    }

    fn finish(
        &self,
        record: &ScoringRecord,
        index: usize,
        p: Prepared,
        comet: Option<Result<f64, RecordError>>,
        settings: &ScoreSettings,
    ) -> Result<RewardBreakdown, RecordError> {
        let weights = settings.recipe.effective_weights(&settings.weights);
        let Some(comet) = comet else {
            // Format failure: nothing else is computed.
            return Ok(combine(&p.parsed, &ComponentValues::default(), &weights)?);
        };
        let comet = comet?;
        let recipe = settings.recipe;
        let policy = settings.matching.resolve(&p.lang_tgt);
        let src = self.sequence(record.src_tokens.as_ref(), &p.src, &p.lang_src, "src_tokens")?;
        let reference = self.sequence(record.ref_tokens.as_ref(), &p.reference, &p.lang_tgt, "ref_tokens")?;
        let hyp = self.sequence(record.hyp_tokens.as_ref(), &p.parsed.answer, &p.lang_tgt, "hyp_tokens")?;
        let mut values = ComponentValues {
            comet,
            ..Default::default()
        };
        let mut diag = Diagnostics {
            src_len: src.len(),
            ref_len: reference.len(),
            pred_len: hyp.len(),
            case_folded: policy.fold,
            intersection: policy.intersection,
            think_match: policy.think,
            segmentation_fallback: [&src, &reference, &hyp].iter().any(|s| s.warning().is_some()),
            ..Default::default()
        };
        if recipe.needs_alignment() {
            let (aref, apre, oov) = self.alignment_pair(record, index, &src, &reference, &hyp)?;
            let record_lexicon;
            let lexicon = match (&record.key_src_tokens, &self.keys) {
                (Some(tokens), _) => {
                    record_lexicon = KeywordLexicon::from_tokens(tokens, false, "record");
                    Some(&record_lexicon)
                }
                (None, Keys::Lexicon(l)) => Some(l),
                (None, Keys::All) => None,
            };
            let select = |set: AlignmentSet| match lexicon {
                Some(l) => filter_key(&set, l),
                None => KeyAlignmentSet::all(set),
            };
            let (aref_key, apre_key) = (select(aref), select(apre));
            diag.oov_tokens = oov;
            diag.ref_key_links = aref_key.len();
            diag.pred_key_links = apre_key.len();
            diag.empty_lexicon = aref_key.empty_lexicon_warning();
            if recipe.uses_aaw() {
                let w = reward_aaw(&aref_key, &apre_key, src.len(), hyp.len(), &policy)?;
                values.aaw = w.value;
                diag.matched_links = w.matched;
            }
            if recipe.uses_aao() {
                let o = reward_aao(&aref_key, &apre_key, &policy);
                values.aao = o.value;
                diag.ref_order_pairs = o.ref_pairs;
                diag.matched_order_pairs = o.matched_pairs;
            }
            if recipe.uses_taw() {
                let t = reward_taw(&aref_key, &p.parsed.think, &p.lang_src, &p.lang_tgt, &self.tokenizer, &policy);
                values.taw = t.value;
                diag.think_hits = t.matched;
            }
        }
        if recipe.uses_bleu() {
            values.bleu = Some(reward_bleu(&hyp, &reference)?);
        }
        let mut breakdown = combine(&p.parsed, &values, &weights)?;
        breakdown.diagnostics = Some(diag);
        Ok(breakdown)
    }
}

/// One output line of batch scoring: the breakdown fields flattened, or an
/// error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub index: usize,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<RewardBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

impl ScoreLine {
    pub fn new(index: usize, result: &Result<RewardBreakdown, RecordError>) -> Self {
        match result {
            Ok(b) => Self {
                index,
                breakdown: Some(b.clone()),
                error: None,
                latency_ms: None,
            },
            Err(e) => Self {
                index,
                breakdown: None,
                error: Some(e.to_string()),
                latency_ms: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub summary: bool,
    pub records: usize,
    pub scored: usize,
    pub errors: usize,
    pub format_failure_rate: f64,
    pub mean_r_all: f64,
    pub mean_r_comet: f64,
    pub mean_r_aaw: f64,
    pub mean_r_aao: f64,
    pub mean_r_taw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_r_bleu: Option<f64>,
    pub recipe: Recipe,
    pub config_hash: String,
}

/// Means over the successfully scored records (format failures included).
pub fn summarize<'a, I>(results: I, recipe: Recipe, config_hash: &str) -> BatchSummary
where
    I: IntoIterator<Item = &'a Result<RewardBreakdown, RecordError>>,
{
    let mut records = 0;
    let mut scored: Vec<&RewardBreakdown> = Vec::new();
    for r in results {
        records += 1;
        if let Ok(b) = r {
            scored.push(b);
        }
    }
    let n = scored.len();
    let mean = |f: &dyn Fn(&RewardBreakdown) -> f64| {
        if n == 0 {
            0.0
        } else {
            scored.iter().map(|b| f(b)).sum::<f64>() / n as f64
        }
    };
    let bleus: Vec<f64> = scored.iter().filter_map(|b| b.r_bleu).collect();
    BatchSummary {
        summary: true,
        records,
        scored: n,
        errors: records - n,
        format_failure_rate: mean(&|b| f64::from(1 - b.r_format)),
        mean_r_all: mean(&|b| b.r_all),
        mean_r_comet: mean(&|b| b.r_comet),
        mean_r_aaw: mean(&|b| b.r_aaw),
        mean_r_aao: mean(&|b| b.r_aao),
        mean_r_taw: mean(&|b| b.r_taw),
        mean_r_bleu: (!bleus.is_empty()).then(|| bleus.iter().sum::<f64>() / bleus.len() as f64),
        recipe,
        config_hash: config_hash.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl SemanticScorer for Counting {
        fn model(&self) -> &str {
            "counting"
        }

        fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
            self.0.fetch_add(items.len(), Ordering::SeqCst);
            Ok(vec![0.5; items.len()])
        }
    }

    struct Down;

    impl SemanticScorer for Down {
        fn model(&self) -> &str {
            "down"
        }

        fn score(&self, _: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
            Err(ScorerError::Unavailable("connection refused".into()))
        }
    }

    fn config(binding: &str) -> RewardConfig {
        RewardConfig::from_toml_str(&format!(
            "version = 1\nrecipe = \"all\"\n[alignment]\nsource = \"record\"\n[scorer]\nbinding = \"{binding}\"\n[languages]\nsrc = \"en\"\ntgt = \"de\"\n"
        ))
        .unwrap()
    }

    fn record(output: &str) -> ScoringRecord {
        ScoringRecord {
            src: Some("the cat sleeps".into()),
            reference: Some("die Katze schläft".into()),
            output: Some(output.into()),
            align_ref: Some("0-0 1-1 2-2".into()),
            align_pre: Some("0-0 1-1 2-2".into()),
            ..Default::default()
        }
    }

    #[test]
    fn gate_skips_scorer() {
        let counter = Arc::new(Counting(AtomicUsize::new(0)));
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap().with_scorer(counter.clone());
        let out = engine.score_batch(&[record("<answer>die Katze schläft</answer>")], 0).unwrap();
        let b = out[0].as_ref().unwrap();
        assert_eq!((b.r_format, b.r_all), (0, 0.0));
        assert!(b.diagnostics.is_none());
        assert_eq!(counter.0.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn full_record() {
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap();
        let b = engine
            .score_record(&record("<think>cat = Katze</think><answer>die Katze schläft</answer>"), 0)
            .unwrap()
            .unwrap();
        assert_eq!(b.r_comet, 0.8);
        assert_eq!(b.r_aaw, 0.5);
        assert_eq!(b.r_aao, 1.0);
        assert!((b.r_taw - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.r_all, 0.8 + 0.5 + 0.1 + 0.1 / 3.0);
    }

    #[test]
    fn precomputed_comet_is_rounded() {
        let engine = Engine::load(&config("precomputed"), Path::new(".")).unwrap();
        let mut r = record("<think></think><answer>die Katze schläft</answer>");
        r.comet = Some(0.9132);
        assert_eq!(engine.score_record(&r, 0).unwrap().unwrap().r_comet, 0.91);
        r.comet = None;
        assert_eq!(engine.score_record(&r, 0).unwrap().unwrap_err(), RecordError::MissingComet);
    }

    #[test]
    fn missing_output_is_per_record() {
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap();
        let mut bad = record("");
        bad.output = None;
        let out = engine.score_batch(&[bad, record("<think>a</think><answer>die Katze schläft</answer>")], 0).unwrap();
        assert_eq!(out[0].as_ref().unwrap_err(), &RecordError::MissingField("output"));
        assert!(out[1].is_ok());
    }

    #[test]
    fn scorer_failure_is_not_zero() {
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap().with_scorer(Arc::new(Down));
        let err = engine.score_batch(&[record("<think>a</think><answer>b</answer>")], 0).unwrap_err();
        assert!(matches!(err, ScorerError::Unavailable(_)));
        let detached = RewardConfig::from_toml_str(
            "version = 1\nrecipe = \"comet\"\n[scorer]\nbinding = \"endpoint\"\nurl = \"http://127.0.0.1:9\"\n",
        )
        .unwrap();
        let engine = Engine::load(&detached, Path::new(".")).unwrap();
        assert!(engine.score_batch(&[record("<think>a</think><answer>b</answer>")], 0).is_err());
    }

    #[test]
    fn summary_means() {
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap();
        let out = engine
            .score_batch(
                &[record("<think>a</think><answer>die Katze schläft</answer>"), record("bad")],
                0,
            )
            .unwrap();
        let s = summarize(&out, Recipe::All, "h");
        assert_eq!((s.records, s.scored, s.errors), (2, 2, 0));
        assert_eq!(s.format_failure_rate, 0.5);
        let expected = (out[0].as_ref().unwrap().r_all + 0.0) / 2.0;
        assert!((s.mean_r_all - expected).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let engine = Engine::load(&config("mock:0.8"), Path::new(".")).unwrap();
        let settings = engine
            .settings()
            .apply(&ScoreOverrides {
                recipe: Some(Recipe::Comet),
                ..Default::default()
            })
            .unwrap();
        let out = engine
            .score_batch_with(&[record("<think>a</think><answer>die Katze schläft</answer>")], 0, &settings)
            .unwrap();
        assert_eq!(out[0].0.as_ref().unwrap().r_all, 0.8);
    }
}

//! Browser bindings. Each export takes plain strings/numbers and returns JSON.

use serde::{Deserialize, Serialize};
use termalign_core::align::{align, em_train, format_pharaoh, parse_pharaoh, AlignMode, AlignModel, AlignmentSet};
use termalign_core::config::Recipe;
use termalign_core::grpo::{clipped_surrogate, group_stats, normalize_advantages, StdKind};
use termalign_core::keys::{filter_key, KeyAlignmentSet, KeywordLexicon};
use termalign_core::policy::MatchPolicy;
use termalign_core::reward::{
    combine, parse_output, reward_aao, reward_aaw, reward_bleu, reward_taw, ComponentValues, FormatMode, RewardBreakdown,
    RewardWeights,
};
use termalign_core::text::Tokenizer;
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct ScoreInput {
    pub src: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub output: String,
    /// Pharaoh `i-j` links against the reference and against the answer.
    pub align_ref: String,
    pub align_pre: String,
    /// Source words whose links count; empty keeps every link.
    #[serde(default)]
    pub keys: Vec<String>,
    pub comet: f64,
    #[serde(default = "default_recipe")]
    pub recipe: String,
    #[serde(default = "default_src")]
    pub lang_src: String,
    #[serde(default = "default_tgt")]
    pub lang_tgt: String,
}

fn default_recipe() -> String {
    "all".into()
}
fn default_src() -> String {
    "en".into()
}
fn default_tgt() -> String {
    "de".into()
}

pub fn score_json(input: &str) -> Result<RewardBreakdown, String> {
    let input: ScoreInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let recipe: Recipe = input.recipe.parse().map_err(|e: String| e)?;
    let weights = recipe.effective_weights(&RewardWeights::default());
    let parsed = parse_output(&input.output, FormatMode::Strict);
    if !parsed.format_ok {
        return combine(&parsed, &ComponentValues::default(), &weights).map_err(|e| e.to_string());
    }
    let tk = Tokenizer::default();
    let src = tk.tokenize(&input.src, &input.lang_src);
    let reference = tk.tokenize(&input.reference, &input.lang_tgt);
    let hyp = tk.tokenize(&parsed.answer, &input.lang_tgt);
    let policy = MatchPolicy::default().resolve(&input.lang_tgt);
    let aref = parse_pharaoh(&input.align_ref, &src, &reference).map_err(|e| format!("align_ref: {e}"))?;
    let apre = parse_pharaoh(&input.align_pre, &src, &hyp).map_err(|e| format!("align_pre: {e}"))?;
    let lexicon = (!input.keys.is_empty()).then(|| KeywordLexicon::from_tokens(&input.keys, policy.fold, "demo"));
    let select = |set: AlignmentSet| match &lexicon {
        Some(l) => filter_key(&set, l),
        None => KeyAlignmentSet::all(set),
    };
    let (rk, pk) = (select(aref), select(apre));
    let mut values = ComponentValues {
        comet: input.comet,
        ..Default::default()
    };
    if recipe.uses_aaw() {
        values.aaw = reward_aaw(&rk, &pk, src.len(), hyp.len(), &policy).map_err(|e| e.to_string())?.value;
    }
    if recipe.uses_aao() {
        values.aao = reward_aao(&rk, &pk, &policy).value;
    }
    if recipe.uses_taw() {
        values.taw = reward_taw(&rk, &parsed.think, &input.lang_src, &input.lang_tgt, &tk, &policy).value;
    }
    if recipe.uses_bleu() {
        values.bleu = Some(reward_bleu(&hyp, &reference).map_err(|e| e.to_string())?);
    }
    combine(&parsed, &values, &weights).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct GroupView {
    pub mean: f64,
    pub std: f64,
    pub advantages: Vec<f64>,
    /// `(ratio, surrogate at A = +1, surrogate at A = -1)`.
    pub curve: Vec<(f64, f64, f64)>,
}

pub fn group_view(rewards: &str, epsilon: f64) -> Result<GroupView, String> {
    let rewards: Vec<f64> = rewards
        .split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<_, _>>()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(format!("epsilon must be in (0, 1), got {epsilon}"));
    }
    let advantages = normalize_advantages(&rewards, StdKind::Population).map_err(|e| e.to_string())?;
    let (mean, std) = group_stats(&rewards, StdKind::Population);
    let curve = (0..=60)
        .map(|i| {
            let rho = i as f64 * 0.05;
            (rho, clipped_surrogate(rho, 1.0, epsilon), clipped_surrogate(rho, -1.0, epsilon))
        })
        .collect();
    Ok(GroupView {
        mean,
        std,
        advantages,
        curve,
    })
}

#[derive(Debug, Serialize)]
pub struct AlignView {
    pub log_likelihood: Vec<f64>,
    /// Pharaoh alignment of each training pair.
    pub alignments: Vec<String>,
}

/// Trains IBM1 on `src<TAB>tgt` lines and aligns the training pairs.
pub fn align_view(corpus: &str, iterations: u32, mode: &str, src_lang: &str, tgt_lang: &str) -> Result<AlignView, String> {
    let mode: AlignMode = mode.parse()?;
    let tk = Tokenizer::default();
    let mut pairs = Vec::new();
    for (n, line) in corpus.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (s, t) = line.split_once('\t').ok_or(format!("line {}: expected src<TAB>tgt", n + 1))?;
        pairs.push((tk.tokenize(s, src_lang), tk.tokenize(t, tgt_lang)));
    }
    let report = em_train(&pairs, iterations.clamp(1, 200) as usize, AlignModel::Ibm1).map_err(|e| e.to_string())?;
    let alignments = pairs.iter().map(|(s, t)| format_pharaoh(&align(&report.table, s, t, mode).set)).collect();
    Ok(AlignView {
        log_likelihood: report.log_likelihood,
        alignments,
    })
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score(input: &str) -> Result<String, JsError> {
    js(score_json(input))
}

#[wasm_bindgen]
pub fn advantages(rewards: &str, epsilon: f64) -> Result<String, JsError> {
    js(group_view(rewards, epsilon))
}

#[wasm_bindgen]
pub fn train_aligner(corpus: &str, iterations: u32, mode: &str, src_lang: &str, tgt_lang: &str) -> Result<String, JsError> {
    js(align_view(corpus, iterations, mode, src_lang, tgt_lang))
}

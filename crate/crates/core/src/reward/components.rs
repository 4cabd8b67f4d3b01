//! The three alignment rewards and the sentence-BLEU recipe component.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::RewardError;
use crate::keys::KeyAlignmentSet;
use crate::metrics::sentence_bleu;
use crate::policy::{Intersection, ResolvedPolicy, ThinkMatch};
use crate::text::{TokenSequence, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordOutcome {
    pub value: f64,
    pub matched: usize,
}

/// Matched key links over `N + K` (source length plus prediction length).
///
/// A reference link matches a predicted link with the same source index and,
/// under [`Intersection::Surface`], the same target surface form (under
/// [`Intersection::Position`], the same target index). Each reference link
/// consumes at most one predicted link, taking the lowest target index first.
pub fn reward_aaw(
    aref_key: &KeyAlignmentSet,
    apre_key: &KeyAlignmentSet,
    src_len: usize,
    pred_len: usize,
    policy: &ResolvedPolicy,
) -> Result<WordOutcome, RewardError> {
    if src_len == 0 {
        return Err(RewardError::EmptySource);
    }
    if pred_len == 0 && !apre_key.is_empty() {
        return Err(RewardError::InconsistentPrediction { links: apre_key.len() });
    }
    let pred = apre_key.links();
    let mut used = vec![false; pred.len()];
    let mut matched = 0;
    for r in aref_key.links() {
        let hit = pred.iter().enumerate().position(|(k, p)| {
            !used[k]
                && p.src_idx == r.src_idx
                && match policy.intersection {
                    Intersection::Surface => policy.same(&p.tgt_word, &r.tgt_word),
                    Intersection::Position => p.tgt_idx == r.tgt_idx,
                }
        });
        if let Some(k) = hit {
            used[k] = true;
            matched += 1;
        }
    }
    Ok(WordOutcome {
        value: matched as f64 / (src_len + pred_len) as f64,
        matched,
    })
}

/// Target-side key words in target order (ties by source index).
pub fn key_word_order(keys: &KeyAlignmentSet, policy: &ResolvedPolicy) -> Vec<String> {
    let mut links: Vec<_> = keys.links().iter().collect();
    links.sort_by_key(|l| (l.tgt_idx, l.src_idx));
    links.iter().map(|l| policy.norm(&l.tgt_word).into_owned()).collect()
}

/// All ordered pairs `(x_a, x_b)` with `a < b`: `[a, b, c] -> {ab, ac, bc}`.
pub fn order_pairs<T: Ord + Clone>(seq: &[T]) -> BTreeSet<(T, T)> {
    let mut out = BTreeSet::new();
    for (a, x) in seq.iter().enumerate() {
        for y in &seq[a + 1..] {
            out.insert((x.clone(), y.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderOutcome {
    pub value: f64,
    pub ref_pairs: usize,
    pub matched_pairs: usize,
}

/// Share of the reference's ordered key-word pairs that the prediction keeps.
pub fn reward_aao(aref_key: &KeyAlignmentSet, apre_key: &KeyAlignmentSet, policy: &ResolvedPolicy) -> OrderOutcome {
    let reference = order_pairs(&key_word_order(aref_key, policy));
    let predicted = order_pairs(&key_word_order(apre_key, policy));
    let matched_pairs = reference.intersection(&predicted).count();
    let value = if reference.is_empty() {
        policy.empty_order_reward
    } else {
        matched_pairs as f64 / reference.len() as f64
    };
    OrderOutcome {
        value,
        ref_pairs: reference.len(),
        matched_pairs,
    }
}

/// Share of reference key links whose source and target words both appear
/// in the reasoning span. Zero when there are no reference key links.
pub fn reward_taw(
    aref_key: &KeyAlignmentSet,
    think: &str,
    src_lang: &str,
    tgt_lang: &str,
    tokenizer: &Tokenizer,
    policy: &ResolvedPolicy,
) -> WordOutcome {
    if aref_key.is_empty() {
        return WordOutcome { value: 0.0, matched: 0 };
    }
    let present: Box<dyn Fn(&str) -> bool> = match policy.think {
        ThinkMatch::Tokens => {
            let mut vocab: HashSet<String> = HashSet::new();
            for lang in [src_lang, tgt_lang] {
                for t in tokenizer.tokenize(think, lang).into_tokens() {
                    vocab.insert(policy.norm(&t).into_owned());
                }
            }
            Box::new(move |w: &str| vocab.contains(policy.norm(w).as_ref()))
        }
        ThinkMatch::Substring => {
            let haystack = policy.norm(think).into_owned();
            Box::new(move |w: &str| haystack.contains(policy.norm(w).as_ref()))
        }
    };
    let hits = aref_key
        .links()
        .iter()
        .filter(|l| present(&l.src_word) && present(&l.tgt_word))
        .count();
    WordOutcome {
        value: hits as f64 / aref_key.len() as f64,
        matched: hits,
    }
}

/// Smoothed sentence BLEU in [0, 1].
pub fn reward_bleu(answer: &TokenSequence, reference: &TokenSequence) -> Result<f64, RewardError> {
    Ok(sentence_bleu(answer, reference, 4)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::AlignmentSet;
    use crate::keys::KeyAlignmentSet;
    use crate::text::TokenSequence;

    fn seq(t: &[&str]) -> TokenSequence {
        TokenSequence::from_pretokenized(t, "xx").unwrap()
    }

    fn keys(src: &[&str], tgt: &[&str], pairs: &[(usize, usize)]) -> KeyAlignmentSet {
        KeyAlignmentSet::all(AlignmentSet::from_pairs(pairs.iter().copied(), &seq(src), &seq(tgt)).unwrap())
    }

    fn exact() -> ResolvedPolicy {
        ResolvedPolicy::exact()
    }

    #[test]
    fn aaw_two_matches_over_eight() {
        // N = K = 4; reference keys s0->A, s2->C, s3->D; prediction translates
        // s0 and s2 identically (different positions) and s3 differently.
        let src = ["s0", "s1", "s2", "s3"];
        let aref = keys(&src, &["A", "B", "C", "D"], &[(0, 0), (2, 2), (3, 3)]);
        let apre = keys(&src, &["C", "x", "A", "y"], &[(0, 2), (2, 0), (3, 3)]);
        let out = reward_aaw(&aref, &apre, 4, 4, &exact()).unwrap();
        assert_eq!(out.matched, 2);
        assert_eq!(out.value, 0.25);
    }

    #[test]
    fn aaw_edges() {
        let src = ["a", "b"];
        let aref = keys(&src, &["x", "y"], &[(0, 0), (1, 1)]);
        let empty = keys(&src, &["x"], &[]);
        assert_eq!(reward_aaw(&aref, &empty, 2, 1, &exact()).unwrap().value, 0.0);
        assert_eq!(reward_aaw(&aref, &aref, 2, 2, &exact()).unwrap().value, 0.5);
        assert!(matches!(
            reward_aaw(&aref, &aref, 2, 0, &exact()),
            Err(RewardError::InconsistentPrediction { links: 2 })
        ));
        assert!(matches!(reward_aaw(&aref, &aref, 0, 2, &exact()), Err(RewardError::EmptySource)));
    }

    #[test]
    fn aaw_duplicate_words_consume_once() {
        // Two reference links from s0 both rendered "x"; prediction has one.
        let aref = keys(&["s0"], &["x", "x"], &[(0, 0), (0, 1)]);
        let apre = keys(&["s0"], &["x"], &[(0, 0)]);
        assert_eq!(reward_aaw(&aref, &apre, 1, 1, &exact()).unwrap().matched, 1);
    }

    #[test]
    fn aaw_position_mode() {
        let aref = keys(&["s"], &["x", "y"], &[(0, 1)]);
        let apre = keys(&["s"], &["y", "x"], &[(0, 1)]);
        let mut policy = exact();
        assert_eq!(reward_aaw(&aref, &apre, 1, 2, &policy).unwrap().matched, 0);
        policy.intersection = Intersection::Position;
        assert_eq!(reward_aaw(&aref, &apre, 1, 2, &policy).unwrap().matched, 1);
    }

    #[test]
    fn od_of_three() {
        let od = order_pairs(&["a", "b", "c"]);
        let expected: BTreeSet<_> = [("a", "b"), ("a", "c"), ("b", "c")].into_iter().collect();
        assert_eq!(od, expected);
    }

    #[test]
    fn aao_swapped_order() {
        let src = ["s0", "s1", "s2"];
        let aref = keys(&src, &["a", "b", "c"], &[(0, 0), (1, 1), (2, 2)]);
        let apre = keys(&src, &["a", "c", "b"], &[(0, 0), (1, 2), (2, 1)]);
        let out = reward_aao(&aref, &apre, &exact());
        assert_eq!((out.ref_pairs, out.matched_pairs), (3, 2));
        assert!((out.value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(reward_aao(&aref, &aref, &exact()).value, 1.0);
    }

    #[test]
    fn aao_degenerate_reference() {
        let one = keys(&["s"], &["a"], &[(0, 0)]);
        let mut policy = exact();
        assert_eq!(reward_aao(&one, &one, &policy).value, 1.0);
        policy.empty_order_reward = 0.0;
        assert_eq!(reward_aao(&one, &one, &policy).value, 0.0);
    }

    #[test]
    fn taw_examples() {
        let aref = keys(&["cat", "dog"], &["猫", "狗"], &[(0, 0), (1, 1)]);
        let tk = Tokenizer::default();
        let p = exact();
        let half = reward_taw(&aref, "the cat … 猫 is key", "en", "zh", &tk, &p);
        assert_eq!((half.value, half.matched), (0.5, 1));
        assert_eq!(reward_taw(&aref, "", "en", "zh", &tk, &p).value, 0.0);
        assert_eq!(reward_taw(&aref, "cat=猫, dog=狗", "en", "zh", &tk, &p).value, 1.0);
        let none = keys(&["cat"], &["猫"], &[]);
        assert_eq!(reward_taw(&none, "cat 猫", "en", "zh", &tk, &p).value, 0.0);
    }

    #[test]
    fn taw_tokens_vs_substring() {
        let aref = keys(&["cat"], &["Katze"], &[(0, 0)]);
        let tk = Tokenizer::default();
        let mut p = exact();
        assert_eq!(reward_taw(&aref, "concatenate Katzen", "en", "de", &tk, &p).value, 0.0);
        p.think = ThinkMatch::Substring;
        assert_eq!(reward_taw(&aref, "concatenate Katzen", "en", "de", &tk, &p).value, 1.0);
    }

    #[test]
    fn bleu_component() {
        let r = seq(&["the", "cat"]);
        assert_eq!(reward_bleu(&r, &r).unwrap(), 1.0);
        assert!(reward_bleu(&seq(&["dog"]), &r).unwrap() < 0.05);
        assert!(reward_bleu(&r, &seq(&[])).is_err());
    }
}

//! Brute-force reference implementations of the three alignment rewards,
//! computed straight from raw instances without the library's types.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use termalign_core::align::AlignmentSet;
use termalign_core::keys::{filter_key, KeyAlignmentSet, KeywordLexicon};
use termalign_core::text::TokenSequence;

pub const SRC_WORDS: [&str; 5] = ["s0", "s1", "s2", "s3", "s4"];
pub const TGT_WORDS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub src: Vec<String>,
    pub reference: Vec<String>,
    pub pred: Vec<String>,
    pub aref: BTreeSet<(usize, usize)>,
    pub apre: BTreeSet<(usize, usize)>,
    pub keys: Vec<String>,
    pub think: Vec<String>,
}

fn words(rng: &mut impl Rng, pool: &[&str], lo: usize, hi: usize) -> Vec<String> {
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| pool.choose(rng).unwrap().to_string()).collect()
}

fn links(rng: &mut impl Rng, n: usize, m: usize) -> BTreeSet<(usize, usize)> {
    if n == 0 || m == 0 {
        return BTreeSet::new();
    }
    let k = rng.gen_range(0..=8);
    (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(0..m))).collect()
}

/// At most 8 tokens per side, at most 8 links per alignment.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let src = words(rng, &SRC_WORDS, 1, 8);
    let reference = words(rng, &TGT_WORDS, 1, 8);
    let pred = words(rng, &TGT_WORDS, 0, 8);
    let aref = links(rng, src.len(), reference.len());
    let apre = links(rng, src.len(), pred.len());
    let keys: Vec<String> = SRC_WORDS.iter().filter(|_| rng.gen_bool(0.6)).map(|w| w.to_string()).collect();
    let pool: Vec<&str> = SRC_WORDS.iter().chain(&TGT_WORDS).copied().collect();
    let think = words(rng, &pool, 0, 8);
    Instance {
        src,
        reference,
        pred,
        aref,
        apre,
        keys,
        think,
    }
}

fn key_links(inst: &Instance, set: &BTreeSet<(usize, usize)>, tgt: &[String]) -> Vec<(usize, usize, String, String)> {
    set.iter()
        .filter(|(i, _)| inst.keys.contains(&inst.src[*i]))
        .map(|&(i, j)| (i, j, inst.src[i].clone(), tgt[j].clone()))
        .collect()
}

fn best_matching(r: &[(usize, usize, String, String)], p: &[(usize, usize, String, String)], used: &mut Vec<bool>) -> usize {
    let Some((first, rest)) = r.split_first() else { return 0 };
    let mut best = best_matching(rest, p, used);
    for k in 0..p.len() {
        if !used[k] && p[k].0 == first.0 && p[k].3 == first.3 {
            used[k] = true;
            best = best.max(1 + best_matching(rest, p, used));
            used[k] = false;
        }
    }
    best
}

/// Maximum matching over all assignments, divided by N + K.
pub fn oracle_aaw(inst: &Instance) -> f64 {
    let r = key_links(inst, &inst.aref, &inst.reference);
    let p = key_links(inst, &inst.apre, &inst.pred);
    let m = best_matching(&r, &p, &mut vec![false; p.len()]);
    m as f64 / (inst.src.len() + inst.pred.len()) as f64
}

fn od(mut l: Vec<(usize, usize, String, String)>) -> Vec<(String, String)> {
    l.sort_by_key(|x| (x.1, x.0));
    let mut out = Vec::new();
    for a in 0..l.len() {
        for b in a + 1..l.len() {
            let pair = (l[a].3.clone(), l[b].3.clone());
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    out
}

pub fn oracle_aao(inst: &Instance) -> f64 {
    let r = od(key_links(inst, &inst.aref, &inst.reference));
    let p = od(key_links(inst, &inst.apre, &inst.pred));
    if r.is_empty() {
        return 1.0;
    }
    r.iter().filter(|x| p.contains(x)).count() as f64 / r.len() as f64
}

pub fn oracle_taw(inst: &Instance) -> f64 {
    let r = key_links(inst, &inst.aref, &inst.reference);
    if r.is_empty() {
        return 0.0;
    }
    let present: HashSet<&str> = inst.think.iter().map(String::as_str).collect();
    let hits = r.iter().filter(|l| present.contains(l.2.as_str()) && present.contains(l.3.as_str())).count();
    hits as f64 / r.len() as f64
}

pub fn seq(tokens: &[String], lang: &str) -> TokenSequence {
    TokenSequence::from_pretokenized(tokens, lang).unwrap()
}

/// The instance in library form: (reference keys, predicted keys).
pub fn key_sets(inst: &Instance) -> (KeyAlignmentSet, KeyAlignmentSet) {
    let src = seq(&inst.src, "en");
    let lexicon = KeywordLexicon::from_tokens(&inst.keys, false, "oracle");
    let aref = AlignmentSet::from_pairs(inst.aref.iter().copied(), &src, &seq(&inst.reference, "de")).unwrap();
    let apre = AlignmentSet::from_pairs(inst.apre.iter().copied(), &src, &seq(&inst.pred, "de")).unwrap();
    (filter_key(&aref, &lexicon), filter_key(&apre, &lexicon))
}

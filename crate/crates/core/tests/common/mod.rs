//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use smt_core::align::AlignmentMatrix;
use smt_core::corpus::{Sentence, SentencePair};
use smt_core::decoder::{Features, WeightVector, UNKNOWN_WORD_PENALTY};
use smt_core::lm::{train, NGramModel, Smoothing};
use smt_core::mert::NBestPool;
use smt_core::phrase::{distortion_cost, PhraseScores, PhraseTable};

pub const SOURCE_VOCAB: &[&str] = &["a", "b", "c", "d", "e"];
pub const TARGET_VOCAB: &[&str] = &["x", "y", "z", "w", "v", "u"];

/// A trigram model over part of [`TARGET_VOCAB`]; `u` stays unseen.
pub fn toy_lm() -> NGramModel {
    let corpus: Vec<Sentence> = ["x y z", "y x w", "x y", "z z y v", "w x y z v", "v w"]
        .into_iter()
        .map(Sentence::from_text)
        .collect();
    train(&corpus, 3, Smoothing::WittenBell).unwrap()
}

/// A sentence of length 1..=5 and a table with at most three options per
/// distinct source span of length up to 3.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Sentence, PhraseTable) {
    let len = rng.random_range(1..=5);
    let words: Vec<&str> = (0..len).map(|_| *SOURCE_VOCAB.choose(rng).unwrap()).collect();
    let mut table = PhraseTable::new();
    let mut seen = BTreeSet::new();
    for i in 0..len {
        for j in i..len.min(i + 3) {
            let key = words[i..=j].join(" ");
            if !seen.insert(key.clone()) || rng.random_bool(0.3) {
                continue;
            }
            for _ in 0..rng.random_range(1..=3) {
                let tlen = rng.random_range(1..=2);
                let target: Vec<&str> = (0..tlen).map(|_| *TARGET_VOCAB.choose(rng).unwrap()).collect();
                let scores = PhraseScores::from_array(std::array::from_fn(|_| rng.random_range(0.05..=1.0)));
                table.insert(&key, &target.join(" "), scores);
            }
        }
    }
    (Sentence::from_text(&words.join(" ")), table)
}

/// Random weights with a mix of signs, LM positive.
pub fn random_weights(rng: &mut ChaCha8Rng) -> WeightVector {
    let mut w: Features = std::array::from_fn(|_| rng.random_range(-0.5..=1.0));
    w[0] = rng.random_range(0.1..=1.0);
    WeightVector::new(w).unwrap()
}

/// Options of one span: table entries, plus the copy-through for a lone
/// word without any single-word entry.
fn span_options(words: &[String], table: &PhraseTable, i: usize, j: usize) -> Vec<(Vec<String>, [f64; 5])> {
    let key = words[i..=j].join(" ");
    let mut out = Vec::new();
    if let Some(opts) = table.options(&key) {
        for (t, sc) in opts {
            let target: Vec<String> = t.split(' ').map(str::to_owned).collect();
            let n = target.len() as f64;
            out.push((target, [sc.phi_ts.ln(), sc.lex_ts.ln(), sc.phi_st.ln(), sc.lex_st.ln(), -n]));
        }
    } else if i == j {
        out.push((vec![words[i].clone()], [0.0, 0.0, 0.0, 0.0, -(1.0 + UNKNOWN_WORD_PENALTY)]));
    }
    out
}

/// Best score of every reachable target string over all segmentations,
/// orderings and options, with the jump limit if given.
pub fn exhaustive(
    sentence: &Sentence,
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    limit: Option<usize>,
) -> BTreeMap<String, f64> {
    let words = sentence.tokens().to_vec();
    let n = words.len();
    let mut best = BTreeMap::new();
    let mut covered = vec![false; n];
    let mut target = Vec::new();
    let mut partial = [0.0; 8];
    walk(&words, table, lm, weights, limit, -1, &mut covered, &mut target, &mut partial, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn walk(
    words: &[String],
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    limit: Option<usize>,
    last_end: i64,
    covered: &mut Vec<bool>,
    target: &mut Vec<String>,
    partial: &mut Features,
    best: &mut BTreeMap<String, f64>,
) {
    let n = words.len();
    if covered.iter().all(|&c| c) {
        let mut f = *partial;
        let t = Sentence::from_text(&target.join(" "));
        f[0] = lm.sentence_logprob(&t) * std::f64::consts::LN_10;
        let score = weights.score(&f);
        let slot = best.entry(t.to_string()).or_insert(f64::NEG_INFINITY);
        if score > *slot {
            *slot = score;
        }
        return;
    }
    for i in 0..n {
        for j in i..n {
            if covered[j] {
                break;
            }
            let jump = distortion_cost(last_end, i as i64);
            if limit.is_some_and(|l| jump > l as f64) {
                continue;
            }
            for (t, fixed) in span_options(words, table, i, j) {
                let saved = *partial;
                for k in 0..4 {
                    partial[k + 1] += fixed[k];
                }
                partial[5] -= jump;
                partial[6] += fixed[4];
                partial[7] -= 1.0;
                for c in &mut covered[i..=j] {
                    *c = true;
                }
                let mark = target.len();
                target.extend(t);
                walk(words, table, lm, weights, limit, j as i64, covered, target, partial, best);
                target.truncate(mark);
                for c in &mut covered[i..=j] {
                    *c = false;
                }
                *partial = saved;
            }
        }
    }
}

pub fn max_score(scores: &BTreeMap<String, f64>) -> f64 {
    scores.values().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Every `(source span, target span)` rectangle with a link inside and none
/// crossing its edges, both sides at most `max_len`.
pub fn consistent_rectangles(
    pair: &SentencePair,
    alignment: &AlignmentMatrix,
    max_len: usize,
) -> BTreeSet<((usize, usize), (usize, usize))> {
    let mut out = BTreeSet::new();
    let links = alignment.links();
    for i1 in 0..pair.source.len() {
        for i2 in i1..pair.source.len() {
            for j1 in 0..pair.target.len() {
                for j2 in j1..pair.target.len() {
                    if i2 - i1 + 1 > max_len || j2 - j1 + 1 > max_len {
                        continue;
                    }
                    let src = |i: usize| i1 <= i && i <= i2;
                    let tgt = |j: usize| j1 <= j && j <= j2;
                    let inside = links.iter().any(|&(i, j)| src(i) && tgt(j));
                    let crossing = links.iter().any(|&(i, j)| src(i) != tgt(j));
                    if inside && !crossing {
                        out.insert(((i1, i2), (j1, j2)));
                    }
                }
            }
        }
    }
    out
}

/// A random pair over synthetic words with a random alignment.
pub fn random_aligned_pair(rng: &mut ChaCha8Rng, max_len: usize) -> (SentencePair, AlignmentMatrix) {
    let n = rng.random_range(1..=max_len);
    let m = rng.random_range(1..=max_len);
    let density = rng.random_range(0.05..0.6);
    let mut links = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.random_bool(density) {
                links.push((i, j));
            }
        }
    }
    let src: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let tgt: Vec<String> = (0..m).map(|j| format!("t{j}")).collect();
    let pair = SentencePair {
        id: 0,
        source: Sentence::from_text(&src.join(" ")),
        target: Sentence::from_text(&tgt.join(" ")),
    };
    (pair, AlignmentMatrix::new(0, n, m, links).unwrap())
}

/// A pool of up to 4 sentences with up to 5 candidates each, drawn over a
/// tiny vocabulary so BLEU varies between candidates.
pub fn random_pool(rng: &mut ChaCha8Rng) -> NBestPool {
    let vocab = ["p", "q", "r", "s"];
    let sentences = rng.random_range(1..=4);
    let refs: Vec<Vec<Sentence>> = (0..sentences)
        .map(|_| {
            let len = rng.random_range(4..=7);
            let w: Vec<&str> = (0..len).map(|_| *vocab.choose(rng).unwrap()).collect();
            vec![Sentence::from_text(&w.join(" "))]
        })
        .collect();
    let mut pool = NBestPool::new(refs.clone()).unwrap();
    for (i, r) in refs.iter().enumerate() {
        let cands = rng.random_range(1..=5);
        for k in 0..cands {
            // The first candidate is the reference itself.
            let mut words: Vec<String> = r[0].tokens().to_vec();
            let edits = if k == 0 { 0 } else { rng.random_range(1..=3) };
            for _ in 0..edits {
                let pos = rng.random_range(0..words.len());
                words[pos] = vocab.choose(rng).unwrap().to_string();
            }
            let features: Features = std::array::from_fn(|_| rng.random_range(-3i32..=3) as f64);
            pool.add(i, Sentence::from_text(&words.join(" ")), features).unwrap();
        }
    }
    pool
}

/// Highest pool BLEU over `lo, lo + step, ..., hi` along the line.
pub fn grid_best(pool: &NBestPool, base: &WeightVector, direction: &Features, lo: f64, hi: f64, step: f64) -> f64 {
    let points = ((hi - lo) / step).round() as usize;
    (0..=points)
        .map(|k| pool.bleu(&base.moved(direction, lo + k as f64 * step).unwrap()))
        .fold(f64::NEG_INFINITY, f64::max)
}

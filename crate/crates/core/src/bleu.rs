//! Corpus BLEU from clipped n-gram counts and a brevity penalty.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics for orders 1 through [`MAX_ORDER`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl std::iter::Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::default(), Add::add)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped counts of `hypothesis` against `references`. The reference length
/// is the one closest to the hypothesis length, the shorter on ties.
pub fn sentence_stats(hypothesis: &Sentence, references: &[Sentence]) -> Result<BleuStats> {
    if references.is_empty() {
        return Err(Error::Parameter("at least one reference is required".into()));
    }
    let hyp = hypothesis.tokens();
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ..Default::default()
    };
    stats.ref_len = references
        .iter()
        .map(|r| r.len() as u64)
        .min_by_key(|&len| (len.abs_diff(stats.hyp_len), len))
        .expect("nonempty");
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for r in references {
            for (gram, c) in ngram_counts(r.tokens(), n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    Ok(stats)
}

/// Summed statistics for a hypothesis list against per-sentence references.
pub fn corpus_stats(hypotheses: &[Sentence], references: &[Vec<Sentence>]) -> Result<BleuStats> {
    if hypotheses.len() != references.len() {
        return Err(Error::AlignmentMismatch {
            source_lines: hypotheses.len(),
            target_lines: references.len(),
        });
    }
    hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| sentence_stats(h, r))
        .sum::<Result<BleuStats>>()
}

/// A scored BLEU with its components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BleuScore {
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub max_order: usize,
    pub brevity_penalty: f64,
    pub ratio: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

pub fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Unsmoothed BLEU over orders `1..=max_order`; zero when any order has no
/// match or the hypothesis side is empty.
pub fn corpus_bleu_with_order(stats: &BleuStats, max_order: usize) -> BleuScore {
    let max_order = max_order.clamp(1, MAX_ORDER);
    let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| match stats.totals[n] {
        0 => 0.0,
        total => stats.matches[n] as f64 / total as f64,
    });
    let bp = brevity_penalty(stats.hyp_len, stats.ref_len);
    let bleu = if stats.hyp_len == 0 || precisions[..max_order].contains(&0.0) {
        0.0
    } else {
        let mean = precisions[..max_order].iter().map(|p| p.ln()).sum::<f64>() / max_order as f64;
        bp * mean.exp()
    };
    BleuScore {
        bleu,
        precisions,
        max_order,
        brevity_penalty: bp,
        ratio: if stats.ref_len == 0 { 0.0 } else { stats.hyp_len as f64 / stats.ref_len as f64 },
        hyp_len: stats.hyp_len,
        ref_len: stats.ref_len,
    }
}

pub fn corpus_bleu(stats: &BleuStats) -> BleuScore {
    corpus_bleu_with_order(stats, MAX_ORDER)
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.precisions[..self.max_order]
            .iter()
            .map(|p| format!("{:.1}", 100.0 * p))
            .collect();
        write!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            100.0 * self.bleu,
            ps.join("/"),
            self.brevity_penalty,
            self.ratio,
            self.hyp_len,
            self.ref_len
        )
    }
}

/// Reads a percentage such as `24.51` or `24,51` into a fraction.
pub fn parse_percentage(text: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .trim_end_matches('%')
        .replace(',', ".")
        .parse()
        .map_err(|_| Error::Parameter(format!("not a percentage: `{text}`")))?;
    Ok(v / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(t: &str) -> Sentence {
        Sentence::from_text(t)
    }

    #[test]
    fn identity() {
        let st = sentence_stats(&s("a b c d e"), &[s("a b c d e")]).unwrap();
        assert_eq!(st.matches, st.totals);
        assert_eq!(corpus_bleu(&st).bleu, 1.0);
    }

    #[test]
    fn clipping() {
        let st = sentence_stats(&s("the the the"), &[s("the cat")]).unwrap();
        assert_eq!((st.matches[0], st.totals[0]), (1, 3));
    }

    #[test]
    fn closest_reference_length_prefers_shorter() {
        let st = sentence_stats(&s("a b c d e"), &[s("a b c d"), s("a b c d e f")]).unwrap();
        assert_eq!(st.ref_len, 4);
    }

    #[test]
    fn brevity_example() {
        let st = sentence_stats(&s("the cat sat"), &[s("the cat sat down")]).unwrap();
        assert_eq!(corpus_bleu(&st).bleu, 0.0);
        let b = corpus_bleu_with_order(&st, 3);
        assert!((b.bleu - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
        assert!((b.bleu - 0.7165).abs() < 1e-4);
    }

    #[test]
    fn empty_hypothesis() {
        let st = sentence_stats(&s(""), &[s("a b")]).unwrap();
        assert_eq!(st.totals, [0; 4]);
        assert_eq!(st.hyp_len, 0);
        assert_eq!(corpus_bleu(&st).bleu, 0.0);
    }

    #[test]
    fn report_format() {
        let st = sentence_stats(&s("a b c d e"), &[s("a b c d e")]).unwrap();
        assert_eq!(
            corpus_bleu(&st).to_string(),
            "BLEU = 100.00, 100.0/100.0/100.0/100.0 (BP=1.000, ratio=1.000, hyp_len=5, ref_len=5)"
        );
        assert!((parse_percentage("24,51").unwrap() - 0.2451).abs() < 1e-15);
        assert!((parse_percentage("24.51").unwrap() - 0.2451).abs() < 1e-15);
    }

    fn sent() -> impl Strategy<Value = Sentence> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..8)
            .prop_map(|w| Sentence::from_text(&w.join(" ")))
    }

    proptest! {
        #[test]
        fn stats_are_additive(pairs in prop::collection::vec((sent(), sent()), 1..6)) {
            let (hyps, refs): (Vec<_>, Vec<_>) = pairs.into_iter().map(|(h, r)| (h, vec![r])).unzip();
            let whole = corpus_stats(&hyps, &refs).unwrap();
            let k = hyps.len() / 2;
            let a = corpus_stats(&hyps[..k], &refs[..k]).unwrap();
            let b = corpus_stats(&hyps[k..], &refs[k..]).unwrap();
            prop_assert_eq!(whole, a + b);
        }

        #[test]
        fn bounded_and_order_invariant(h in sent(), r1 in sent(), r2 in sent(), r3 in sent()) {
            let st = sentence_stats(&h, &[r1.clone(), r2.clone(), r3.clone()]).unwrap();
            let permuted = sentence_stats(&h, &[r3.clone(), r1.clone(), r2.clone()]).unwrap();
            prop_assert_eq!(st, permuted);
            for n in 0..MAX_ORDER {
                prop_assert!(st.matches[n] <= st.totals[n]);
            }
            let b = corpus_bleu(&st).bleu;
            prop_assert!((0.0..=1.0).contains(&b));
            let fewer = sentence_stats(&h, &[r1, r2]).unwrap();
            for n in 0..MAX_ORDER {
                prop_assert!(fewer.matches[n] <= st.matches[n]);
            }
        }
    }
}

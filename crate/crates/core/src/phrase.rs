//! Phrase pairs consistent with a word alignment, their translation scores,
//! and the distance-based distortion penalty.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::align::{AlignmentMatrix, TranslationLexicon};
use crate::corpus::{ParallelCorpus, SentencePair};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 7;

/// Targets kept per source phrase when a table is written out.
pub const DEFAULT_TABLE_LIMIT: usize = 20;

/// Probabilities below this are clamped so every score stays in (0, 1].
const MIN_SCORE: f64 = 1e-12;

/// An aligned rectangle of one sentence pair. Spans are inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhrasePair {
    pub source_span: (usize, usize),
    pub target_span: (usize, usize),
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// Links inside the rectangle, relative to its top-left corner.
    pub links: Vec<(usize, usize)>,
}

impl PhrasePair {
    pub fn source_text(&self) -> String {
        self.source.join(" ")
    }

    pub fn target_text(&self) -> String {
        self.target.join(" ")
    }
}

/// Every phrase pair whose rectangle contains at least one link and no link
/// leaving it, with both sides at most `max_len` words. Unaligned target
/// words at the edges of a minimal span yield one pair per extension.
pub fn extract(pair: &SentencePair, alignment: &AlignmentMatrix, max_len: usize) -> Vec<PhrasePair> {
    let (rows, cols) = (pair.source.len(), pair.target.len());
    let mut target_aligned = vec![false; cols];
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); rows];
    let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for &(i, j) in alignment.links() {
        if i < rows && j < cols {
            target_aligned[j] = true;
            by_source[i].push(j);
            by_target[j].push(i);
        }
    }

    let mut out = Vec::new();
    for i1 in 0..rows {
        let mut jmin = usize::MAX;
        let mut jmax = 0;
        for (i2, links) in by_source.iter().enumerate().take(rows.min(i1 + max_len)).skip(i1) {
            for &j in links {
                jmin = jmin.min(j);
                jmax = jmax.max(j);
            }
            if jmin == usize::MAX || jmax - jmin + 1 > max_len {
                continue;
            }
            let consistent = (jmin..=jmax).all(|j| by_target[j].iter().all(|&i| (i1..=i2).contains(&i)));
            if !consistent {
                continue;
            }
            let mut lo = jmin;
            while lo > 0 && !target_aligned[lo - 1] {
                lo -= 1;
            }
            let mut hi = jmax;
            while hi + 1 < cols && !target_aligned[hi + 1] {
                hi += 1;
            }
            for j1 in (lo..=jmin).rev() {
                for j2 in jmax..=hi {
                    if j2 - j1 + 1 > max_len {
                        break;
                    }
                    let links = alignment
                        .links()
                        .iter()
                        .filter(|&&(i, j)| (i1..=i2).contains(&i) && (j1..=j2).contains(&j))
                        .map(|&(i, j)| (i - i1, j - j1))
                        .collect();
                    out.push(PhrasePair {
                        source_span: (i1, i2),
                        target_span: (j1, j2),
                        source: pair.source.tokens()[i1..=i2].to_vec(),
                        target: pair.target.tokens()[j1..=j2].to_vec(),
                        links,
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Extraction over a whole corpus, in sentence order.
pub fn extract_corpus(corpus: &ParallelCorpus, alignments: &[AlignmentMatrix], max_len: usize) -> Result<Vec<PhrasePair>> {
    if corpus.len() != alignments.len() {
        return Err(Error::AlignmentMismatch {
            source_lines: corpus.len(),
            target_lines: alignments.len(),
        });
    }
    let per_pair: Vec<Vec<PhrasePair>> = corpus
        .pairs()
        .par_iter()
        .zip(alignments)
        .map(|(pair, a)| extract(pair, a, max_len))
        .collect();
    Ok(per_pair.into_iter().flatten().collect())
}

/// Scores in file order: `phi(t|s) lex(t|s) phi(s|t) lex(s|t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhraseScores {
    pub phi_ts: f64,
    pub lex_ts: f64,
    pub phi_st: f64,
    pub lex_st: f64,
}

impl PhraseScores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.phi_ts, self.lex_ts, self.phi_st, self.lex_st]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        PhraseScores {
            phi_ts: a[0],
            lex_ts: a[1],
            phi_st: a[2],
            lex_st: a[3],
        }
    }
}

/// Lexical weight of `target` given `source` under internal `links`
/// (source index, target index), scoring unaligned target words against null.
/// `lexicon` is `t(target word | source word)`.
pub fn lexical_weight(
    source: &[String],
    target: &[String],
    links: &[(usize, usize)],
    lexicon: &TranslationLexicon,
) -> f64 {
    let mut weight = 1.0;
    for (j, t) in target.iter().enumerate() {
        let aligned: Vec<usize> = links.iter().filter(|l| l.1 == j).map(|l| l.0).collect();
        let w = if aligned.is_empty() {
            lexicon.prob(None, t)
        } else {
            aligned
                .iter()
                .map(|&i| lexicon.prob(Some(&source[i]), t))
                .sum::<f64>()
                / aligned.len() as f64
        };
        weight *= w;
    }
    weight.clamp(MIN_SCORE, 1.0)
}

/// Source phrase → target phrase → scores, both levels sorted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhraseTable {
    entries: BTreeMap<String, BTreeMap<String, PhraseScores>>,
    max_source_len: usize,
}

impl PhraseTable {
    pub fn new() -> Self {
        PhraseTable::default()
    }

    pub fn insert(&mut self, source: &str, target: &str, scores: PhraseScores) {
        self.max_source_len = self.max_source_len.max(source.split(' ').count());
        self.entries
            .entry(source.to_owned())
            .or_default()
            .insert(target.to_owned(), scores);
    }

    /// Translation options for a space-joined source phrase.
    pub fn options(&self, source: &str) -> Option<&BTreeMap<String, PhraseScores>> {
        self.entries.get(source)
    }

    pub fn get(&self, source: &str, target: &str) -> Option<&PhraseScores> {
        self.entries.get(source)?.get(target)
    }

    /// Longest source phrase in words.
    pub fn max_source_len(&self) -> usize {
        self.max_source_len
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &PhraseScores)> {
        self.entries
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |(t, sc)| (s.as_str(), t.as_str(), sc)))
    }

    /// Keeps the `limit` best targets of each source by `phi(t|s)`, ties
    /// going to the lexicographically smaller target.
    pub fn pruned(&self, limit: usize) -> PhraseTable {
        let mut out = PhraseTable::new();
        for (source, targets) in &self.entries {
            let mut ranked: Vec<(&String, &PhraseScores)> = targets.iter().collect();
            ranked.sort_by(|a, b| b.1.phi_ts.total_cmp(&a.1.phi_ts).then_with(|| a.0.cmp(b.0)));
            for (t, sc) in ranked.into_iter().take(limit) {
                out.insert(source, t, *sc);
            }
        }
        out
    }

    /// `source ||| target ||| phi(t|s) lex(t|s) phi(s|t) lex(s|t)` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, t, sc) in self.iter() {
            let _ = writeln!(out, "{s} ||| {t} ||| {} {} {} {}", sc.phi_ts, sc.lex_ts, sc.phi_st, sc.lex_st);
        }
        out
    }

    /// Writes the table pruned to `limit` targets per source.
    pub fn write(&self, path: impl AsRef<Path>, limit: usize) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.pruned(limit).to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> Result<PhraseTable> {
        let mut table = PhraseTable::new();
        for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::parse(n, "expected source ||| target ||| scores"));
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::parse(n, "empty phrase"));
            }
            let scores: Vec<f64> = fields[2]
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(n, "bad score"))?;
            let scores: [f64; 4] = scores
                .try_into()
                .map_err(|_| Error::parse(n, "expected four scores"))?;
            if scores.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::parse(n, "scores must lie in (0, 1]"));
            }
            let source = fields[0].split_whitespace().collect::<Vec<_>>().join(" ");
            let target = fields[1].split_whitespace().collect::<Vec<_>>().join(" ");
            table.insert(&source, &target, PhraseScores::from_array(scores));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PhraseTable> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhraseTable::parse(&text)
    }
}

/// Relative-frequency and lexical scoring of phrase pairs extracted from a
/// whole corpus. `forward` is `t(target | source)`, `backward` is
/// `t(source | target)`.
pub fn score(
    extracted: &[PhrasePair],
    forward: &TranslationLexicon,
    backward: &TranslationLexicon,
) -> PhraseTable {
    // (source, target) → (count, internal alignment → count)
    type Counts = (u64, BTreeMap<Vec<(usize, usize)>, u64>);
    let mut joint: BTreeMap<(String, String), Counts> = BTreeMap::new();
    let mut source_counts: HashMap<String, u64> = HashMap::new();
    let mut target_counts: HashMap<String, u64> = HashMap::new();
    let mut words: HashMap<(String, String), (Vec<String>, Vec<String>)> = HashMap::new();
    for p in extracted {
        let key = (p.source_text(), p.target_text());
        *source_counts.entry(key.0.clone()).or_insert(0) += 1;
        *target_counts.entry(key.1.clone()).or_insert(0) += 1;
        words
            .entry(key.clone())
            .or_insert_with(|| (p.source.clone(), p.target.clone()));
        let slot = joint.entry(key).or_default();
        slot.0 += 1;
        *slot.1.entry(p.links.clone()).or_insert(0) += 1;
    }

    let mut table = PhraseTable::new();
    for ((s, t), (count, alignments)) in &joint {
        // Most frequent internal alignment; BTreeMap order breaks ties.
        let (links, _) = alignments
            .iter()
            .fold(None::<(&Vec<(usize, usize)>, u64)>, |best, (a, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((a, c)),
            })
            .expect("at least one occurrence");
        let (src_words, tgt_words) = &words[&(s.clone(), t.clone())];
        let flipped: Vec<(usize, usize)> = links.iter().map(|&(i, j)| (j, i)).collect();
        let scores = PhraseScores {
            phi_ts: *count as f64 / source_counts[s] as f64,
            lex_ts: lexical_weight(src_words, tgt_words, links, forward),
            phi_st: *count as f64 / target_counts[t] as f64,
            lex_st: lexical_weight(tgt_words, src_words, &flipped, backward),
        };
        table.insert(s, t, scores);
    }
    table
}

/// Linear distortion: `|next_start - prev_end - 1|`. Use `prev_end = -1`
/// for the sentence start.
pub fn distortion_cost(prev_end: i64, next_start: i64) -> f64 {
    (next_start - prev_end - 1).unsigned_abs() as f64
}

/// Distance penalty scaled by a per-word weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionModel {
    pub per_word: f64,
}

impl Default for DistortionModel {
    fn default() -> Self {
        DistortionModel { per_word: 1.0 }
    }
}

impl DistortionModel {
    pub fn penalty(&self, prev_end: i64, next_start: i64) -> f64 {
        self.per_word * distortion_cost(prev_end, next_start)
    }
}

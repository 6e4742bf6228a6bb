//! IBM Model 1 word alignment and alignment symmetrization.
//!
//! The lexicon holds `t(target | source)`, normalized per source word. Every
//! source sentence is extended with an implicit null word, which absorbs
//! target words that have no counterpart; a target word aligned to null is
//! simply left without a link.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{ParallelCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::lm::{Vocabulary, WordId};

/// Printed name of the null source word in lexicon dumps.
pub const NULL_WORD: &str = "NULL";

const NULL_ID: WordId = WordId::MAX;

/// Model 1 translation probabilities `t(target | source)`.
#[derive(Clone, Debug, Default)]
pub struct TranslationLexicon {
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    probs: HashMap<(WordId, WordId), f64>,
}

impl TranslationLexicon {
    /// `t(target | source)`; `None` is the null word. Unseen pairs give 0.
    pub fn prob(&self, source: Option<&str>, target: &str) -> f64 {
        let s = match source {
            Some(w) => match self.source_vocab.get(w) {
                Some(id) => id,
                None => return 0.0,
            },
            None => NULL_ID,
        };
        self.target_vocab
            .get(target)
            .and_then(|t| self.probs.get(&(s, t)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(source, target, prob)` triples sorted by source then target.
    pub fn entries(&self) -> Vec<(&str, &str, f64)> {
        let mut out: Vec<(&str, &str, f64)> = self
            .probs
            .iter()
            .map(|(&(s, t), &p)| {
                let source = if s == NULL_ID {
                    NULL_WORD
                } else {
                    self.source_vocab.word(s).expect("interned")
                };
                (source, self.target_vocab.word(t).expect("interned"), p)
            })
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    /// `source<TAB>target<TAB>prob` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, t, p) in self.entries() {
            out.push_str(&format!("{s}\t{t}\t{p}\n"));
        }
        out
    }

    /// Reads [`TranslationLexicon::dump`] output.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = TranslationLexicon::default();
        for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [s, t, p] = fields[..] else {
                return Err(Error::parse(n, "expected source<TAB>target<TAB>prob"));
            };
            let p: f64 = p.parse().map_err(|_| Error::parse(n, "bad probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(n, "probability outside [0, 1]"));
            }
            let s = if s == NULL_WORD { NULL_ID } else { lex.source_vocab.insert(s) };
            let t = lex.target_vocab.insert(t);
            if lex.probs.insert((s, t), p).is_some() {
                return Err(Error::parse(n, "duplicate entry"));
            }
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        TranslationLexicon::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }

    /// Sum of `t(· | source)` for every conditioning word, null included.
    pub fn conditional_sums(&self) -> Vec<(String, f64)> {
        let mut sums: HashMap<WordId, f64> = HashMap::new();
        let mut keys: Vec<&(WordId, WordId)> = self.probs.keys().collect();
        keys.sort();
        for k in keys {
            *sums.entry(k.0).or_insert(0.0) += self.probs[k];
        }
        let mut out: Vec<(String, f64)> = sums
            .into_iter()
            .map(|(s, total)| {
                let name = if s == NULL_ID {
                    NULL_WORD.to_owned()
                } else {
                    self.source_vocab.word(s).expect("interned").to_owned()
                };
                (name, total)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Result of EM training with the corpus log-likelihood (natural log)
/// before the first and after every iteration.
#[derive(Clone, Debug)]
pub struct EmTrace {
    pub lexicon: TranslationLexicon,
    pub log_likelihood: Vec<f64>,
}

/// Co-occurrence slots: every (source, target) pair seen in one sentence pair
/// gets a dense index so that counting and normalization run in a fixed order.
struct Slots {
    pairs: Vec<(WordId, WordId)>,
    /// Per sentence pair: source length (with null) and the slot of every
    /// (target j, source i) cell, row-major by target position.
    cells: Vec<(usize, Vec<usize>)>,
}

fn build_slots(
    corpus: &ParallelCorpus,
    source_vocab: &mut Vocabulary,
    target_vocab: &mut Vocabulary,
) -> Slots {
    let mut index: HashMap<(WordId, WordId), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut cells = Vec::with_capacity(corpus.len());
    for pair in corpus.pairs() {
        let src: Vec<WordId> = std::iter::once(NULL_ID)
            .chain(pair.source.iter().map(|w| source_vocab.insert(w)))
            .collect();
        let mut row = Vec::with_capacity(src.len() * pair.target.len());
        for t in pair.target.iter() {
            let t = target_vocab.insert(t);
            for &s in &src {
                let slot = *index.entry((s, t)).or_insert_with(|| {
                    pairs.push((s, t));
                    pairs.len() - 1
                });
                row.push(slot);
            }
        }
        cells.push((src.len(), row));
    }
    Slots { pairs, cells }
}

/// Trains Model 1 by EM from a uniform start over co-occurring pairs.
pub fn em_train(corpus: &ParallelCorpus, iterations: usize) -> Result<TranslationLexicon> {
    em_train_traced(corpus, iterations).map(|t| t.lexicon)
}

/// [`em_train`], also reporting the log-likelihood trajectory.
pub fn em_train_traced(corpus: &ParallelCorpus, iterations: usize) -> Result<EmTrace> {
    if iterations < 1 {
        return Err(Error::Parameter("EM needs at least one iteration".into()));
    }
    if corpus.is_empty() || corpus.pairs().iter().all(|p| p.target.is_empty()) {
        return Err(Error::Training("empty alignment corpus".into()));
    }
    let mut source_vocab = Vocabulary::default();
    let mut target_vocab = Vocabulary::default();
    let slots = build_slots(corpus, &mut source_vocab, &mut target_vocab);
    let source_index = |s: WordId| if s == NULL_ID { 0 } else { s as usize + 1 };
    let n_sources = source_vocab.len() + 1;

    let mut fanout = vec![0usize; n_sources];
    for &(s, _) in &slots.pairs {
        fanout[source_index(s)] += 1;
    }
    let mut t: Vec<f64> = slots
        .pairs
        .iter()
        .map(|&(s, _)| 1.0 / fanout[source_index(s)] as f64)
        .collect();

    let mut log_likelihood = Vec::with_capacity(iterations + 1);
    let mut counts = vec![0.0; t.len()];
    for _ in 0..iterations {
        counts.iter_mut().for_each(|c| *c = 0.0);
        let mut ll = 0.0;
        for (width, row) in &slots.cells {
            for cells in row.chunks(*width) {
                let denom: f64 = cells.iter().map(|&c| t[c]).sum();
                ll += (denom / *width as f64).ln();
                for &c in cells {
                    counts[c] += t[c] / denom;
                }
            }
        }
        log_likelihood.push(ll);
        let mut totals = vec![0.0; n_sources];
        for (slot, &(s, _)) in slots.pairs.iter().enumerate() {
            totals[source_index(s)] += counts[slot];
        }
        for (slot, &(s, _)) in slots.pairs.iter().enumerate() {
            t[slot] = counts[slot] / totals[source_index(s)];
        }
    }
    let mut ll = 0.0;
    for (width, row) in &slots.cells {
        for cells in row.chunks(*width) {
            let denom: f64 = cells.iter().map(|&c| t[c]).sum();
            ll += (denom / *width as f64).ln();
        }
    }
    log_likelihood.push(ll);

    let probs = slots.pairs.iter().copied().zip(t).collect();
    Ok(EmTrace {
        lexicon: TranslationLexicon {
            source_vocab,
            target_vocab,
            probs,
        },
        log_likelihood,
    })
}

/// Word links between one source and one target sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentMatrix {
    pub pair_id: usize,
    pub source_len: usize,
    pub target_len: usize,
    links: BTreeSet<(usize, usize)>,
}

impl AlignmentMatrix {
    pub fn new(
        pair_id: usize,
        source_len: usize,
        target_len: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let links: BTreeSet<(usize, usize)> = links.into_iter().collect();
        if let Some(&(i, j)) = links.iter().find(|&&(i, j)| i >= source_len || j >= target_len) {
            return Err(Error::Parameter(format!(
                "link {i}-{j} outside a {source_len}x{target_len} sentence pair"
            )));
        }
        Ok(AlignmentMatrix {
            pair_id,
            source_len,
            target_len,
            links,
        })
    }

    /// `(source index, target index)` links in ascending order.
    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.links
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.links.contains(&(i, j))
    }

    pub fn transpose(&self) -> AlignmentMatrix {
        AlignmentMatrix {
            pair_id: self.pair_id,
            source_len: self.target_len,
            target_len: self.source_len,
            links: self.links.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Parses a Moses `i-j i-j ...` line.
    pub fn parse(line: &str, pair_id: usize, source_len: usize, target_len: usize) -> Result<Self> {
        let mut links = Vec::new();
        for item in line.split_whitespace() {
            let (i, j) = item
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or_else(|| Error::parse(pair_id + 1, format!("bad alignment point {item:?}")))?;
            links.push((i, j));
        }
        AlignmentMatrix::new(pair_id, source_len, target_len, links)
            .map_err(|e| Error::parse(pair_id + 1, e.to_string()))
    }
}

impl fmt::Display for AlignmentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, j) in &self.links {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{i}-{j}")?;
            first = false;
        }
        Ok(())
    }
}

/// Links every target word to its most probable source word, or leaves it
/// unlinked when the null word is strictly more probable. Ties between
/// source words go to the smaller index.
pub fn viterbi_align(lexicon: &TranslationLexicon, pair: &SentencePair) -> AlignmentMatrix {
    let mut links = BTreeSet::new();
    for (j, target) in pair.target.iter().enumerate() {
        let null = lexicon.prob(None, target);
        let mut best: Option<(usize, f64)> = None;
        for (i, source) in pair.source.iter().enumerate() {
            let p = lexicon.prob(Some(source), target);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        if let Some((i, p)) = best {
            if p > 0.0 && p >= null {
                links.insert((i, j));
            }
        }
    }
    AlignmentMatrix {
        pair_id: pair.id,
        source_len: pair.source.len(),
        target_len: pair.target.len(),
        links,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Heuristic {
    Intersection,
    Union,
    #[default]
    GrowDiagFinal,
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intersection" | "intersect" => Ok(Heuristic::Intersection),
            "union" => Ok(Heuristic::Union),
            "grow-diag-final" | "gdf" => Ok(Heuristic::GrowDiagFinal),
            _ => Err(Error::Parameter(format!("unknown symmetrization heuristic {s:?}"))),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Intersection => "intersection",
            Heuristic::Union => "union",
            Heuristic::GrowDiagFinal => "grow-diag-final",
        })
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

/// Combines two directional alignments, both given in (source, target)
/// orientation.
pub fn symmetrize(
    forward: &AlignmentMatrix,
    backward: &AlignmentMatrix,
    heuristic: Heuristic,
) -> Result<AlignmentMatrix> {
    if (forward.source_len, forward.target_len) != (backward.source_len, backward.target_len) {
        return Err(Error::Parameter(format!(
            "alignment dimensions differ: {}x{} vs {}x{}",
            forward.source_len, forward.target_len, backward.source_len, backward.target_len
        )));
    }
    let union: BTreeSet<(usize, usize)> = forward.links.union(&backward.links).copied().collect();
    let intersection: BTreeSet<(usize, usize)> =
        forward.links.intersection(&backward.links).copied().collect();
    let links = match heuristic {
        Heuristic::Intersection => intersection,
        Heuristic::Union => union,
        Heuristic::GrowDiagFinal => grow_diag_final(forward, backward, &union, intersection),
    };
    Ok(AlignmentMatrix {
        pair_id: forward.pair_id,
        source_len: forward.source_len,
        target_len: forward.target_len,
        links,
    })
}

struct Grid {
    cols: usize,
    cells: Vec<bool>,
    source_aligned: Vec<bool>,
    target_aligned: Vec<bool>,
}

impl Grid {
    fn new(rows: usize, cols: usize) -> Self {
        Grid {
            cols,
            cells: vec![false; rows * cols],
            source_aligned: vec![false; rows],
            target_aligned: vec![false; cols],
        }
    }

    fn has(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.cols + j]
    }

    fn either_free(&self, i: usize, j: usize) -> bool {
        !self.source_aligned[i] || !self.target_aligned[j]
    }

    fn add(&mut self, i: usize, j: usize) {
        self.cells[i * self.cols + j] = true;
        self.source_aligned[i] = true;
        self.target_aligned[j] = true;
    }
}

fn grow_diag_final(
    forward: &AlignmentMatrix,
    backward: &AlignmentMatrix,
    union: &BTreeSet<(usize, usize)>,
    start: BTreeSet<(usize, usize)>,
) -> BTreeSet<(usize, usize)> {
    let (rows, cols) = (forward.source_len, forward.target_len);
    let mut grid = Grid::new(rows, cols);
    for &(i, j) in &start {
        grid.add(i, j);
    }
    loop {
        let mut added = false;
        for i in 0..rows {
            for j in 0..cols {
                if !grid.has(i, j) {
                    continue;
                }
                for (di, dj) in NEIGHBORS {
                    let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                        continue;
                    };
                    if ni >= rows || nj >= cols || grid.has(ni, nj) {
                        continue;
                    }
                    if grid.either_free(ni, nj) && union.contains(&(ni, nj)) {
                        grid.add(ni, nj);
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }
    for &(i, j) in forward.links.iter().chain(backward.links.iter()) {
        if !grid.has(i, j) && grid.either_free(i, j) {
            grid.add(i, j);
        }
    }
    let mut links = BTreeSet::new();
    for i in 0..rows {
        for j in 0..cols {
            if grid.has(i, j) {
                links.insert((i, j));
            }
        }
    }
    links
}

/// Lexicons in both directions plus symmetrized alignments for a corpus.
#[derive(Clone, Debug)]
pub struct CorpusAlignment {
    /// `t(target | source)`.
    pub forward: TranslationLexicon,
    /// `t(source | target)`.
    pub backward: TranslationLexicon,
    pub alignments: Vec<AlignmentMatrix>,
}

pub fn align_corpus(
    corpus: &ParallelCorpus,
    iterations: usize,
    heuristic: Heuristic,
) -> Result<CorpusAlignment> {
    let reversed = corpus.reversed();
    let forward = em_train(corpus, iterations)?;
    let backward = em_train(&reversed, iterations)?;
    let alignments = corpus
        .pairs()
        .iter()
        .zip(reversed.pairs())
        .map(|(pair, rev)| {
            let f = viterbi_align(&forward, pair);
            let b = viterbi_align(&backward, rev).transpose();
            symmetrize(&f, &b, heuristic)
        })
        .collect::<Result<_>>()?;
    Ok(CorpusAlignment {
        forward,
        backward,
        alignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn corpus(pairs: &[(&str, &str)]) -> ParallelCorpus {
        ParallelCorpus::from_pairs(
            "en",
            "ar",
            pairs
                .iter()
                .map(|(s, t)| (Sentence::from_text(s), Sentence::from_text(t))),
        )
    }

    fn matrix(rows: usize, cols: usize, links: &[(usize, usize)]) -> AlignmentMatrix {
        AlignmentMatrix::new(0, rows, cols, links.iter().copied()).unwrap()
    }

    #[test]
    fn forced_association() {
        let lex = em_train(&corpus(&[("a", "x")]), 1).unwrap();
        assert!((lex.prob(Some("a"), "x") - 1.0).abs() < 1e-12);
        assert!((lex.prob(None, "x") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn em_separates_cooccurring_words() {
        // Hand-run from t = 1/2 everywhere: the first pair gives each of
        // null, a, b a third of x and of y; the second gives null and a half
        // of x each. So c(x|a) = 5/6, c(y|a) = 1/3 and t(x|a) = 5/7.
        let c = corpus(&[("a b", "x y"), ("a", "x")]);
        let one = em_train(&c, 1).unwrap();
        assert!((one.prob(Some("a"), "x") - 5.0 / 7.0).abs() < 1e-12);
        assert!((one.prob(Some("a"), "y") - 2.0 / 7.0).abs() < 1e-12);
        assert!((one.prob(Some("b"), "y") - 0.5).abs() < 1e-12);
        let lex = em_train(&c, 3).unwrap();
        assert!(lex.prob(Some("a"), "x") > lex.prob(Some("a"), "y"));
    }

    #[test]
    fn likelihood_is_monotone_and_normalized() {
        let c = corpus(&[("a b c", "x y z"), ("a b", "x y"), ("b c", "y w"), ("a", "x")]);
        let trace = em_train_traced(&c, 5).unwrap();
        assert_eq!(trace.log_likelihood.len(), 6);
        for w in trace.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", trace.log_likelihood);
        }
        for (_, total) in trace.lexicon.conditional_sums() {
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn em_errors() {
        assert!(matches!(em_train(&corpus(&[]), 3), Err(Error::Training(_))));
        assert!(matches!(em_train(&corpus(&[("a", "x")]), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn viterbi_argmax_and_ties() {
        let lex = em_train(&corpus(&[("a", "x")]), 1).unwrap();
        let pair = &corpus(&[("a", "x")]).pairs()[0].clone();
        assert_eq!(viterbi_align(&lex, pair).links().iter().copied().collect::<Vec<_>>(), vec![(0, 0)]);

        // "a" and "b" always co-occur, so their columns are identical.
        let c = corpus(&[("a b", "x")]);
        let lex = em_train(&c, 2).unwrap();
        let m = viterbi_align(&lex, &c.pairs()[0]);
        assert_eq!(m.to_string(), "0-0");
    }

    #[test]
    fn symmetrize_fixed_point_and_set_algebra() {
        let a = matrix(3, 3, &[(0, 0), (1, 2), (2, 1)]);
        for h in [Heuristic::Intersection, Heuristic::Union, Heuristic::GrowDiagFinal] {
            assert_eq!(symmetrize(&a, &a, h).unwrap(), a);
        }
        let f = matrix(2, 2, &[(0, 0)]);
        let b = matrix(2, 2, &[(1, 1)]);
        assert!(symmetrize(&f, &b, Heuristic::Intersection).unwrap().links().is_empty());
        assert_eq!(symmetrize(&f, &b, Heuristic::Union).unwrap().to_string(), "0-0 1-1");
        assert!(symmetrize(&f, &matrix(2, 3, &[]), Heuristic::Union).is_err());
    }

    #[test]
    fn grow_diag_final_hand_trace() {
        // forward  = {0-0, 1-1, 2-1, 3-3}
        // backward = {0-0, 1-1, 1-2, 3-2}
        // intersection {0-0, 1-1}; union adds 2-1, 1-2, 3-2, 3-3.
        // grow: around 1-1, neighbor 2-1 (source 2 free) and 1-2 (target 2
        // free) join; around 1-2 nothing else; 3-2 is diagonal to 2-1 and
        // source 3 is free, so it joins; 3-3 neighbors 3-2 with target 3
        // free, so it joins too. Final adds nothing.
        let f = matrix(4, 4, &[(0, 0), (1, 1), (2, 1), (3, 3)]);
        let b = matrix(4, 4, &[(0, 0), (1, 1), (1, 2), (3, 2)]);
        let g = symmetrize(&f, &b, Heuristic::GrowDiagFinal).unwrap();
        assert_eq!(g.to_string(), "0-0 1-1 1-2 2-1 3-2 3-3");

        // A union point far from the intersection only enters in the final step.
        let f = matrix(4, 4, &[(0, 0), (3, 3)]);
        let b = matrix(4, 4, &[(0, 0), (2, 2)]);
        let g = symmetrize(&f, &b, Heuristic::GrowDiagFinal).unwrap();
        assert_eq!(g.to_string(), "0-0 2-2 3-3");
    }

    #[test]
    fn moses_format_round_trip() {
        let m = matrix(3, 2, &[(0, 1), (2, 0)]);
        assert_eq!(m.to_string(), "0-1 2-0");
        assert_eq!(AlignmentMatrix::parse("0-1 2-0", 0, 3, 2).unwrap(), m);
        assert!(AlignmentMatrix::parse("0-5", 0, 3, 2).is_err());
        assert!(AlignmentMatrix::parse("0:1", 0, 3, 2).is_err());
    }

    #[test]
    fn lexicon_dump_is_sorted() {
        let lex = em_train(&corpus(&[("b a", "y x")]), 1).unwrap();
        let dump = lex.dump();
        let lines: Vec<&str> = dump.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines[0].starts_with("NULL\tx\t"));
    }

    #[test]
    fn lexicon_dump_round_trips() {
        let c = corpus(&[("a b", "x y"), ("a", "x")]);
        let lex = em_train(&c, 3).unwrap();
        let back = TranslationLexicon::parse(&lex.dump()).unwrap();
        assert_eq!(back.dump(), lex.dump());
        assert_eq!(back.prob(None, "y"), lex.prob(None, "y"));
    }
}

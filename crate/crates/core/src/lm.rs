//! Backoff n-gram language models (orders 1 to 5) with ARPA serialization.
//!
//! Sentences are padded with a single `<s>` and a final `</s>`; contexts are
//! truncated to the model order rather than padded with repeated start
//! symbols. The padded stream is counted as is, so `<s>` carries unigram
//! mass. All probabilities are log10.
//!
//! Witten-Bell models are trained in interpolated form and stored in backoff
//! form: every seen n-gram keeps its interpolated probability and every
//! context `h` gets the weight `T(h) / (c(h) + T(h))`, where `T(h)` is the
//! number of distinct continuations of `h`. Backing off through that weight
//! reproduces the interpolated estimate for unseen events exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const MAX_ORDER: usize = 5;

/// log10 value written to ARPA files in place of log(0).
const ARPA_LOG_ZERO: f64 = -99.0;

pub type WordId = u32;

/// Id given to words outside a closed vocabulary (no `<unk>` entry).
pub const OOV: WordId = WordId::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Smoothing {
    /// Relative frequencies with no mass for unseen events; for tests only.
    Mle,
    #[default]
    WittenBell,
}

impl FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Smoothing::Mle),
            "witten-bell" | "wb" | "witten_bell" => Ok(Smoothing::WittenBell),
            _ => Err(Error::Parameter(format!("unknown smoothing {s:?}"))),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothing::Mle => "mle",
            Smoothing::WittenBell => "witten-bell",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub(crate) fn insert(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as WordId;
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (i as WordId, w.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: Option<f64>,
}

/// A trained or loaded backoff model.
#[derive(Clone, Debug)]
pub struct NGramModel {
    order: usize,
    vocab: Vocabulary,
    /// Keyed by the full n-gram (context followed by the predicted word).
    entries: HashMap<Box<[WordId]>, Entry>,
    unk: Option<WordId>,
}

fn check_order(order: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::Parameter(format!(
            "language model order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

fn log10_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Trains a model of the given order on whitespace-tokenized sentences.
pub fn train<'a>(
    corpus: impl IntoIterator<Item = &'a Sentence>,
    order: usize,
    smoothing: Smoothing,
) -> Result<NGramModel> {
    check_order(order)?;
    let mut vocab = Vocabulary::default();
    let bos = vocab.insert(BOS);
    let eos = vocab.insert(EOS);
    let unk = match smoothing {
        Smoothing::WittenBell => Some(vocab.insert(UNK)),
        Smoothing::Mle => None,
    };
    let mut counts: Vec<BTreeMap<Vec<WordId>, u64>> = vec![BTreeMap::new(); order];
    let mut sentences = 0usize;
    let mut stream = Vec::new();
    for sentence in corpus {
        sentences += 1;
        stream.clear();
        stream.push(bos);
        stream.extend(sentence.iter().map(|w| vocab.insert(w)));
        stream.push(eos);
        for end in 0..stream.len() {
            for k in 1..=order.min(end + 1) {
                *counts[k - 1]
                    .entry(stream[end + 1 - k..=end].to_vec())
                    .or_insert(0) += 1;
            }
        }
    }
    if sentences == 0 {
        return Err(Error::Training("empty training corpus".into()));
    }
    if let Some(unk) = unk {
        let c = counts[0].entry(vec![unk]).or_insert(0);
        *c = (*c).max(1);
    }

    let mut model = NGramModel {
        order,
        vocab,
        entries: HashMap::new(),
        unk,
    };

    let total: u64 = counts[0].values().sum();
    for (gram, &c) in &counts[0] {
        model.entries.insert(
            gram.clone().into_boxed_slice(),
            Entry {
                logprob: (c as f64 / total as f64).log10(),
                backoff: None,
            },
        );
    }

    for k in 2..=order {
        let grams: Vec<(&Vec<WordId>, u64)> = counts[k - 1].iter().map(|(g, &c)| (g, c)).collect();
        let mut start = 0;
        while start < grams.len() {
            let context = &grams[start].0[..k - 1];
            let mut end = start;
            let mut context_count = 0u64;
            while end < grams.len() && &grams[end].0[..k - 1] == context {
                context_count += grams[end].1;
                end += 1;
            }
            let types = (end - start) as f64;
            let denom = context_count as f64 + types;
            for &(gram, c) in &grams[start..end] {
                let p = match smoothing {
                    Smoothing::Mle => c as f64 / context_count as f64,
                    Smoothing::WittenBell => {
                        let lower = 10f64.powf(model.logprob_ids(&gram[1..k - 1], gram[k - 1]));
                        (c as f64 + types * lower) / denom
                    }
                };
                model.entries.insert(
                    gram.clone().into_boxed_slice(),
                    Entry {
                        logprob: p.log10(),
                        backoff: None,
                    },
                );
            }
            let backoff = match smoothing {
                Smoothing::Mle => f64::NEG_INFINITY,
                Smoothing::WittenBell => log10_or_zero(types / denom),
            };
            model
                .entries
                .get_mut(context)
                .expect("every context is itself a counted n-gram")
                .backoff = Some(backoff);
            start = end;
        }
    }
    Ok(model)
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn bos(&self) -> WordId {
        self.vocab.get(BOS).unwrap_or(OOV)
    }

    pub fn eos(&self) -> WordId {
        self.vocab.get(EOS).unwrap_or(OOV)
    }

    pub fn unk(&self) -> Option<WordId> {
        self.unk
    }

    /// Id of `word`, falling back to `<unk>` (or [`OOV`] when the model has none).
    pub fn word_id(&self, word: &str) -> WordId {
        self.vocab
            .get(word)
            .or(self.unk)
            .unwrap_or(OOV)
    }

    /// Number of stored n-grams of each order, lowest first.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.order];
        for gram in self.entries.keys() {
            counts[gram.len() - 1] += 1;
        }
        counts
    }

    /// The stored log10 probability of an exact n-gram, if present.
    pub fn stored_logprob(&self, gram: &[WordId]) -> Option<f64> {
        self.entries.get(gram).map(|e| e.logprob)
    }

    /// The stored log10 backoff weight of a context, if present.
    pub fn stored_backoff(&self, context: &[WordId]) -> Option<f64> {
        self.entries.get(context).and_then(|e| e.backoff)
    }

    /// log10 P(word | context) by backoff over stored n-grams. Contexts longer
    /// than `order - 1` are truncated to their most recent words.
    pub fn logprob_ids(&self, context: &[WordId], word: WordId) -> f64 {
        let keep = context.len().min(self.order - 1);
        let context = &context[context.len() - keep..];
        let mut buf = [0 as WordId; MAX_ORDER];
        buf[..keep].copy_from_slice(context);
        buf[keep] = word;
        let mut penalty = 0.0;
        for start in 0..=keep {
            if let Some(e) = self.entries.get(&buf[start..=keep]) {
                return penalty + e.logprob;
            }
            if start < keep {
                if let Some(b) = self.stored_backoff(&buf[start..keep]) {
                    penalty += b;
                }
            }
        }
        f64::NEG_INFINITY
    }

    /// log10 P(word | context) for surface tokens; unknown tokens map to `<unk>`.
    pub fn logprob(&self, word: &str, context: &[&str]) -> f64 {
        let ctx: Vec<WordId> = context.iter().map(|w| self.word_id(w)).collect();
        self.logprob_ids(&ctx, self.word_id(word))
    }

    /// log10 probability of a padded sentence: the sum of per-word terms
    /// including the final `</s>`.
    pub fn sentence_logprob(&self, sentence: &Sentence) -> f64 {
        let mut stream = Vec::with_capacity(sentence.len() + 2);
        stream.push(self.bos());
        let mut total = 0.0;
        for w in sentence.iter().map(|w| self.word_id(w)).chain(std::iter::once(self.eos())) {
            total += self.logprob_ids(&stream, w);
            stream.push(w);
        }
        total
    }

    /// `10^(-logprob / events)` where every word and each `</s>` is an event.
    pub fn perplexity<'a>(&self, corpus: impl IntoIterator<Item = &'a Sentence>) -> Result<f64> {
        let mut total = 0.0;
        let mut events = 0usize;
        for s in corpus {
            total += self.sentence_logprob(s);
            events += s.len() + 1;
        }
        if events == 0 {
            return Err(Error::Parameter("perplexity of an empty corpus".into()));
        }
        Ok(10f64.powf(-total / events as f64))
    }

    /// Serializes in ARPA layout with n-grams sorted by their text.
    pub fn to_arpa(&self) -> String {
        let mut by_order: Vec<Vec<(String, Entry)>> = vec![Vec::new(); self.order];
        for (gram, entry) in &self.entries {
            let text = gram
                .iter()
                .map(|&id| self.vocab.word(id).expect("ids come from the vocabulary"))
                .collect::<Vec<_>>()
                .join(" ");
            by_order[gram.len() - 1].push((text, *entry));
        }
        let mut out = String::from("\\data\\\n");
        for (k, grams) in by_order.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, grams.len());
        }
        for (k, grams) in by_order.iter_mut().enumerate() {
            grams.sort_by(|a, b| a.0.cmp(&b.0));
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            for (text, entry) in grams.iter() {
                let _ = write!(out, "{}\t{}", format_log(entry.logprob), text);
                if let Some(b) = entry.backoff {
                    let _ = write!(out, "\t{}", format_log(b));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn write_arpa(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_arpa()).map_err(|e| Error::io(path, e))
    }

    pub fn read_arpa(path: impl AsRef<Path>) -> Result<NGramModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        NGramModel::from_arpa(&text)
    }

    pub fn from_arpa(text: &str) -> Result<NGramModel> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());

        let (n, header) = lines.next().ok_or_else(|| Error::parse(1, "empty ARPA file"))?;
        if header.trim() != "\\data\\" {
            return Err(Error::parse(n, "expected \\data\\ header"));
        }
        let mut declared: Vec<usize> = Vec::new();
        let mut pending = None;
        for (n, line) in lines.by_ref() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix("ngram ") {
                let (k, c) = header
                    .split_once('=')
                    .ok_or_else(|| Error::parse(n, "malformed ngram count line"))?;
                let k: usize = k.trim().parse().map_err(|_| Error::parse(n, "bad order"))?;
                let c: usize = c.trim().parse().map_err(|_| Error::parse(n, "bad count"))?;
                if k != declared.len() + 1 {
                    return Err(Error::parse(n, "ngram counts must be listed in order"));
                }
                declared.push(c);
            } else {
                pending = Some((n, line));
                break;
            }
        }
        let order = declared.len();
        check_order(order).map_err(|e| Error::parse(1, e.to_string()))?;

        let mut model = NGramModel {
            order,
            vocab: Vocabulary::default(),
            entries: HashMap::new(),
            unk: None,
        };
        let mut section: Option<(usize, usize, usize)> = None; // (order, seen, header line)
        let close = |section: Option<(usize, usize, usize)>, declared: &[usize]| -> Result<()> {
            if let Some((k, seen, at)) = section {
                if seen != declared[k - 1] {
                    return Err(Error::parse(
                        at,
                        format!("{k}-grams section lists {seen} entries but {} were declared", declared[k - 1]),
                    ));
                }
            }
            Ok(())
        };
        let mut ended = false;
        let mut sections_seen = 0;
        for (n, line) in pending.into_iter().chain(lines) {
            let line = line.trim();
            if line == "\\end\\" {
                close(section.take(), &declared)?;
                ended = true;
                break;
            }
            if line.starts_with('\\') {
                close(section.take(), &declared)?;
                let k: usize = line
                    .strip_prefix('\\')
                    .and_then(|l| l.strip_suffix("-grams:"))
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Error::parse(n, format!("unexpected line {line:?}")))?;
                if k != sections_seen + 1 || k > order {
                    return Err(Error::parse(n, format!("unexpected {k}-grams section")));
                }
                sections_seen = k;
                section = Some((k, 0, n));
                continue;
            }
            let Some((k, seen, _)) = section.as_mut() else {
                return Err(Error::parse(n, "n-gram entry outside a section"));
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != *k + 1 && fields.len() != *k + 2 {
                return Err(Error::parse(n, format!("expected {} or {} fields", *k + 1, *k + 2)));
            }
            let logprob = parse_log(fields[0]).ok_or_else(|| Error::parse(n, "bad log probability"))?;
            let backoff = match fields.get(*k + 1) {
                Some(b) => Some(parse_log(b).ok_or_else(|| Error::parse(n, "bad backoff weight"))?),
                None => None,
            };
            let gram: Vec<WordId> = if *k == 1 {
                vec![model.vocab.insert(fields[1])]
            } else {
                fields[1..=*k]
                    .iter()
                    .map(|w| {
                        model
                            .vocab
                            .get(w)
                            .ok_or_else(|| Error::parse(n, format!("word {w:?} has no unigram entry")))
                    })
                    .collect::<Result<_>>()?
            };
            if model
                .entries
                .insert(gram.into_boxed_slice(), Entry { logprob, backoff })
                .is_some()
            {
                return Err(Error::parse(n, "duplicate n-gram"));
            }
            *seen += 1;
        }
        if !ended {
            return Err(Error::parse(text.lines().count(), "missing \\end\\ marker"));
        }
        if sections_seen != order {
            return Err(Error::parse(text.lines().count(), "missing n-gram sections"));
        }
        model.unk = model.vocab.get(UNK);
        Ok(model)
    }
}

fn format_log(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{ARPA_LOG_ZERO:.6}")
    }
}

fn parse_log(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| Sentence::from_text(l)).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn unigram_mle_matches_padded_counts() {
        // Padded stream: <s> a a b </s>
        let m = train(&corpus(&["a a b"]), 1, Smoothing::Mle).unwrap();
        assert!(close(m.logprob("a", &[]), (2.0f64 / 5.0).log10()));
        assert!(close(m.logprob("b", &[]), (1.0f64 / 5.0).log10()));
        assert!(close(m.logprob(EOS, &[]), (1.0f64 / 5.0).log10()));
        assert!(close(m.logprob(BOS, &[]), (1.0f64 / 5.0).log10()));
        assert_eq!(m.logprob("zzz", &[]), f64::NEG_INFINITY);

        let m = train(&corpus(&["a"]), 1, Smoothing::Mle).unwrap();
        assert!(close(m.logprob("a", &[]), (1.0f64 / 3.0).log10()));
    }

    #[test]
    fn bigram_witten_bell_by_formula() {
        // Unigram stream: <s> a b </s> <s> a c </s> plus <unk> floor = 9 tokens.
        // Context "a": count 2, distinct continuations 2.
        let m = train(&corpus(&["a b", "a c"]), 2, Smoothing::WittenBell).unwrap();
        let p_b = 1.0 / 9.0;
        let expected: f64 = (1.0 + 2.0 * p_b) / (2.0 + 2.0);
        assert!(close(m.logprob("b", &["a"]), expected.log10()));
        // Unseen continuation of "a": backoff(a) + log P(a).
        let unseen = (2.0f64 / 4.0).log10() + (2.0f64 / 9.0).log10();
        assert!(close(m.logprob("a", &["a"]), unseen));
        assert!(close(m.stored_backoff(&[m.word_id("a")]).unwrap(), 0.5f64.log10()));
        // Unknown word resolves to the <unk> unigram through the backoff.
        let unk = (2.0f64 / 4.0).log10() + (1.0f64 / 9.0).log10();
        assert!(close(m.logprob("zzz", &["a"]), unk));
        assert!(close(m.logprob("zzz", &[]), (1.0f64 / 9.0).log10()));
    }

    #[test]
    fn seen_ngram_is_table_lookup() {
        let m = train(&corpus(&["a b", "a c"]), 2, Smoothing::WittenBell).unwrap();
        let gram = [m.word_id("a"), m.word_id("b")];
        assert_eq!(m.logprob("b", &["a"]), m.stored_logprob(&gram).unwrap());
    }

    #[test]
    fn long_contexts_are_truncated() {
        let m = train(&corpus(&["a b c d"]), 2, Smoothing::WittenBell).unwrap();
        assert_eq!(m.logprob("d", &["x", "y", "c"]), m.logprob("d", &["c"]));
    }

    #[test]
    fn sentence_logprob_sums_events() {
        let m = train(&corpus(&["a", "b a"]), 1, Smoothing::WittenBell).unwrap();
        let s = Sentence::from_text("a");
        assert_eq!(m.sentence_logprob(&s), m.logprob("a", &[BOS]) + m.logprob(EOS, &[BOS, "a"]));
        let empty = Sentence::default();
        assert_eq!(m.sentence_logprob(&empty), m.logprob(EOS, &[BOS]));
    }

    #[test]
    fn perplexity_single_sentence() {
        let m = train(&corpus(&["a b", "b"]), 2, Smoothing::WittenBell).unwrap();
        let s = Sentence::from_text("a b");
        let expected = 10f64.powf(-m.sentence_logprob(&s) / 3.0);
        assert!(close(m.perplexity([&s]).unwrap(), expected));
        assert!(m.perplexity(std::iter::empty()).is_err());
    }

    #[test]
    fn uniform_model_has_perplexity_v() {
        let v = 4.0f64;
        let lp = format!("{:.6}", (1.0 / v).log10());
        let arpa = format!(
            "\\data\\\nngram 1=4\n\n\\1-grams:\n{lp}\t</s>\n{lp}\t<s>\n{lp}\ta\n{lp}\tb\n\n\\end\\\n"
        );
        let m = NGramModel::from_arpa(&arpa).unwrap();
        let ppl = m.perplexity(&corpus(&["a b b", "b"])).unwrap();
        assert!((ppl - v).abs() < 1e-4, "{ppl}");
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(train(&corpus(&["a"]), 0, Smoothing::Mle), Err(Error::Parameter(_))));
        assert!(matches!(train(&corpus(&["a"]), 6, Smoothing::Mle), Err(Error::Parameter(_))));
        assert!(matches!(train(&corpus(&[]), 3, Smoothing::Mle), Err(Error::Training(_))));
    }

    #[test]
    fn arpa_golden_unigram() {
        let m = train(&corpus(&["a b"]), 1, Smoothing::WittenBell).unwrap();
        let expected = "\\data\\\nngram 1=5\n\n\\1-grams:\n\
                        -0.698970\t</s>\n-0.698970\t<s>\n-0.698970\t<unk>\n-0.698970\ta\n-0.698970\tb\n\n\\end\\\n";
        assert_eq!(m.to_arpa(), expected);
    }

    #[test]
    fn arpa_round_trip_preserves_queries() {
        let m = train(&corpus(&["a b c", "a c b a", "c c"]), 3, Smoothing::WittenBell).unwrap();
        let back = NGramModel::from_arpa(&m.to_arpa()).unwrap();
        assert_eq!(back.counts(), m.counts());
        for ctx in [&[][..], &["a"], &["a", "b"], &["c", "zzz"]] {
            for w in ["a", "b", "c", EOS, "zzz"] {
                assert!((m.logprob(w, ctx) - back.logprob(w, ctx)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn arpa_count_mismatch_reports_line() {
        let bad = "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.3\ta\n-0.3\tb\n\n\\end\\\n";
        match NGramModel::from_arpa(bad) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(NGramModel::from_arpa("junk\n"), Err(Error::Parse { line: 1, .. })));
        let unknown = "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.3\ta\t-0.1\n\n\\2-grams:\n-0.2\ta b\n\\end\\\n";
        assert!(matches!(NGramModel::from_arpa(unknown), Err(Error::Parse { line: 9, .. })));
    }

    #[test]
    fn mle_bigram_zero_mass_for_unseen() {
        let m = train(&corpus(&["a b", "a c"]), 2, Smoothing::Mle).unwrap();
        assert!(close(m.logprob("b", &["a"]), 0.5f64.log10()));
        assert_eq!(m.logprob("a", &["a"]), f64::NEG_INFINITY);
    }
}

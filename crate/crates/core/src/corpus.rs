//! Sentence-aligned corpora: loading, cleaning, statistics and markup stripping.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A sequence of whitespace-free tokens. Sentences admitted to training are nonempty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<String>);

impl Sentence {
    /// Splits a line on Unicode whitespace.
    pub fn from_text(line: &str) -> Self {
        Sentence(line.split_whitespace().map(str::to_owned).collect())
    }

    /// Builds a sentence from tokens, rejecting empty tokens and tokens with whitespace.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        for token in &tokens {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::Parameter(format!("invalid token {token:?}")));
            }
        }
        Ok(Sentence(tokens))
    }

    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Sentence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl FromStr for Sentence {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Sentence::from_text(s))
    }
}

impl<'a> IntoIterator for &'a Sentence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePair {
    pub id: usize,
    pub source: Sentence,
    pub target: Sentence,
}

/// Ordered sentence pairs with dense ids `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    pub source_lang: String,
    pub target_lang: String,
}

impl ParallelCorpus {
    pub fn new(source_lang: impl Into<String>, target_lang: impl Into<String>) -> Self {
        ParallelCorpus {
            pairs: Vec::new(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        }
    }

    /// Builds a corpus from (source, target) sentences, assigning dense ids.
    pub fn from_pairs(
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
        pairs: impl IntoIterator<Item = (Sentence, Sentence)>,
    ) -> Self {
        let mut corpus = ParallelCorpus::new(source_lang, target_lang);
        for (source, target) in pairs {
            corpus.push(source, target);
        }
        corpus
    }

    pub fn push(&mut self, source: Sentence, target: Sentence) {
        let id = self.pairs.len();
        self.pairs.push(SentencePair { id, source, target });
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.source)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.target)
    }

    /// Swaps source and target sides, keeping ids.
    pub fn reversed(&self) -> ParallelCorpus {
        ParallelCorpus::from_pairs(
            self.target_lang.clone(),
            self.source_lang.clone(),
            self.pairs
                .iter()
                .map(|p| (p.target.clone(), p.source.clone())),
        )
    }

    /// Appends `other`, renumbering its pairs.
    pub fn concat(&self, other: &ParallelCorpus) -> ParallelCorpus {
        ParallelCorpus::from_pairs(
            self.source_lang.clone(),
            self.target_lang.clone(),
            self.pairs
                .iter()
                .chain(other.pairs.iter())
                .map(|p| (p.source.clone(), p.target.clone())),
        )
    }
}

fn language_tag(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_owned()
}

/// Reads one sentence per line, whitespace-tokenized.
pub fn load_sentences(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        sentences.push(Sentence::from_text(&line));
    }
    Ok(sentences)
}

/// Writes one sentence per line with LF endings.
pub fn write_sentences<'a>(
    path: impl AsRef<Path>,
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Pairs line `i` of `source_path` with line `i` of `target_path`.
///
/// Language tags are taken from the file extensions (`corpus.en`, `corpus.ar`).
pub fn load_parallel(
    source_path: impl AsRef<Path>,
    target_path: impl AsRef<Path>,
) -> Result<ParallelCorpus> {
    let (source_path, target_path) = (source_path.as_ref(), target_path.as_ref());
    let sources = load_sentences(source_path)?;
    let targets = load_sentences(target_path)?;
    if sources.len() != targets.len() {
        return Err(Error::AlignmentMismatch {
            source_lines: sources.len(),
            target_lines: targets.len(),
        });
    }
    Ok(ParallelCorpus::from_pairs(
        language_tag(source_path),
        language_tag(target_path),
        sources.into_iter().zip(targets),
    ))
}

/// Filtering thresholds for [`clean`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CleanParams {
    pub max_len: usize,
    pub max_ratio: f64,
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            max_len: 80,
            max_ratio: 9.0,
        }
    }
}

impl CleanParams {
    pub fn new(max_len: usize, max_ratio: f64) -> Result<Self> {
        if max_len < 1 {
            return Err(Error::Parameter("max-len must be at least 1".into()));
        }
        if max_ratio.is_nan() || max_ratio < 1.0 {
            return Err(Error::Parameter("max-ratio must be at least 1.0".into()));
        }
        Ok(CleanParams { max_len, max_ratio })
    }

    pub fn admits(&self, source: &Sentence, target: &Sentence) -> bool {
        let (ls, lt) = (source.len(), target.len());
        if ls == 0 || lt == 0 || ls > self.max_len || lt > self.max_len {
            return false;
        }
        let ratio = ls.max(lt) as f64 / ls.min(lt) as f64;
        ratio <= self.max_ratio
    }
}

/// Drops empty, overlong and badly length-balanced pairs. Survivors keep their
/// order and are renumbered.
pub fn clean(corpus: &ParallelCorpus, params: CleanParams) -> ParallelCorpus {
    ParallelCorpus::from_pairs(
        corpus.source_lang.clone(),
        corpus.target_lang.clone(),
        corpus
            .pairs
            .iter()
            .filter(|p| params.admits(&p.source, &p.target))
            .map(|p| (p.source.clone(), p.target.clone())),
    )
}

/// Counts for one side of a corpus (or a monolingual text).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideStats {
    pub lines: usize,
    pub tokens: usize,
    pub vocabulary: usize,
    pub max_len: usize,
    pub mean_len: f64,
}

impl SideStats {
    pub fn of<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let mut vocab: HashSet<&str> = HashSet::new();
        let mut stats = SideStats::default();
        for s in sentences {
            stats.lines += 1;
            stats.tokens += s.len();
            stats.max_len = stats.max_len.max(s.len());
            vocab.extend(s.iter().map(String::as_str));
        }
        stats.vocabulary = vocab.len();
        if stats.lines > 0 {
            stats.mean_len = stats.tokens as f64 / stats.lines as f64;
        }
        stats
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub source_lang: String,
    pub target_lang: String,
    pub source: SideStats,
    pub target: SideStats,
}

pub fn stats(corpus: &ParallelCorpus) -> CorpusStats {
    CorpusStats {
        source_lang: corpus.source_lang.clone(),
        target_lang: corpus.target_lang.clone(),
        source: SideStats::of(corpus.sources()),
        target: SideStats::of(corpus.targets()),
    }
}

impl CorpusStats {
    fn sides(&self) -> [(&str, &SideStats); 2] {
        [
            (self.source_lang.as_str(), &self.source),
            (self.target_lang.as_str(), &self.target),
        ]
    }

    /// Two-column table of word and line counts per language.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>12} {:>12}\n", "", "words", "lines");
        for (i, (tag, side)) in self.sides().into_iter().enumerate() {
            let label = if tag.is_empty() {
                if i == 0 { "source" } else { "target" }
            } else {
                tag
            };
            out.push_str(&format!(
                "{:<10} {:>12} {:>12}\n",
                label, side.tokens, side.lines
            ));
        }
        out
    }

    /// `key=value` lines, one statistic per line.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (prefix, side) in [("source", &self.source), ("target", &self.target)] {
            out.push_str(&format!("{prefix}.lines={}\n", side.lines));
            out.push_str(&format!("{prefix}.tokens={}\n", side.tokens));
            out.push_str(&format!("{prefix}.vocabulary={}\n", side.vocabulary));
            out.push_str(&format!("{prefix}.max_len={}\n", side.max_len));
            out.push_str(&format!("{prefix}.mean_len={:.4}\n", side.mean_len));
        }
        out
    }
}

/// A problem found while stripping markup. Processing continues past it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkupWarning {
    /// Byte offset into the document.
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Markup {
    pub segments: Vec<String>,
    pub warnings: Vec<MarkupWarning>,
}

fn decode_entities(text: &str) -> String {
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn normalize_segment(raw: &str) -> String {
    decode_entities(&raw.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Extracts the text of `<seg>` elements from an SGML/XML-like document.
///
/// Other tags are dropped. A `<` with no matching `>` is kept as literal
/// text. Documents without any `<seg>` element yield their non-blank
/// tag-stripped lines instead.
pub fn strip_markup(document: &str) -> Markup {
    let mut markup = Markup::default();
    let mut in_seg = false;
    let mut seen_seg = false;
    let mut current = String::new();
    let mut outside = String::new();
    let mut rest = document;
    let mut offset = 0usize;

    while let Some(lt) = rest.find('<') {
        let (text, tail) = rest.split_at(lt);
        if in_seg {
            current.push_str(text);
        } else {
            outside.push_str(text);
        }
        let after = &tail[1..];
        let close = after.find('>');
        let reopen = after.find('<');
        let tag_end = match (close, reopen) {
            (Some(c), Some(r)) if r < c => None,
            (c, _) => c,
        };
        let Some(end) = tag_end else {
            markup.warnings.push(MarkupWarning {
                offset: offset + lt,
                message: "unbalanced '<' treated as text".into(),
            });
            if in_seg {
                current.push('<');
            } else {
                outside.push('<');
            }
            offset += lt + 1;
            rest = after;
            continue;
        };
        let tag = after[..end].trim();
        let (closing, body) = match tag.strip_prefix('/') {
            Some(b) => (true, b),
            None => (false, tag),
        };
        let self_closing = body.ends_with('/');
        let name = body
            .trim_end_matches('/')
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        if name == "seg" && !self_closing {
            if closing {
                if in_seg {
                    markup.segments.push(normalize_segment(&current));
                    current.clear();
                    in_seg = false;
                } else {
                    markup.warnings.push(MarkupWarning {
                        offset: offset + lt,
                        message: "closing </seg> without an open segment".into(),
                    });
                }
            } else {
                if in_seg {
                    markup.warnings.push(MarkupWarning {
                        offset: offset + lt,
                        message: "<seg> opened inside an open segment".into(),
                    });
                    markup.segments.push(normalize_segment(&current));
                    current.clear();
                }
                in_seg = true;
                seen_seg = true;
            }
        } else if !in_seg {
            outside.push('\n');
        }
        let consumed = lt + 1 + end + 1;
        offset += consumed;
        rest = &rest[consumed..];
    }
    if in_seg {
        current.push_str(rest);
        markup.warnings.push(MarkupWarning {
            offset: document.len(),
            message: "segment not closed before end of document".into(),
        });
        markup.segments.push(normalize_segment(&current));
    } else {
        outside.push_str(rest);
    }
    if !seen_seg {
        markup.segments = outside
            .lines()
            .map(normalize_segment)
            .filter(|s| !s.is_empty())
            .collect();
    }
    markup
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> Sentence {
        Sentence::from_text(text)
    }

    fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn loads_line_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(dir.path(), "c.en", "a b\nc");
        let tgt = write(dir.path(), "c.ar", "x\ny z");
        let corpus = load_parallel(&src, &tgt).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.pairs()[0].source, s("a b"));
        assert_eq!(corpus.pairs()[0].target, s("x"));
        assert_eq!(corpus.pairs()[1].target, s("y z"));
        assert_eq!(corpus.source_lang, "en");
        assert_eq!(corpus.target_lang, "ar");
    }

    #[test]
    fn line_count_mismatch_names_both_counts() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(dir.path(), "c.en", "a\nb\nc\n");
        let tgt = write(dir.path(), "c.ar", "x\ny\n");
        match load_parallel(&src, &tgt) {
            Err(Error::AlignmentMismatch {
                source_lines: 3,
                target_lines: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_parallel("/nonexistent/a.en", "/nonexistent/a.ar").unwrap_err();
        assert_eq!(err.category(), "io");
    }

    #[test]
    fn clean_keeps_and_drops() {
        let mut c = ParallelCorpus::new("en", "ar");
        c.push(s("a"), s("x"));
        let long = vec!["w"; 100].join(" ");
        c.push(s(&long), s("x"));
        c.push(s(""), s("x"));
        c.push(s("a b c d e f g h i j"), s("x"));
        c.push(s("a b"), s("x y z"));
        let cleaned = clean(&c, CleanParams::default());
        assert_eq!(cleaned.len(), 2);
        assert_eq!(cleaned.pairs()[0].source, s("a"));
        assert_eq!(cleaned.pairs()[1].id, 1);
        assert_eq!(cleaned.pairs()[1].target, s("x y z"));
    }

    #[test]
    fn clean_rejects_bad_params() {
        assert!(CleanParams::new(0, 9.0).is_err());
        assert!(CleanParams::new(80, 0.5).is_err());
        assert!(CleanParams::new(80, f64::NAN).is_err());
    }

    #[test]
    fn stats_counts() {
        let empty = stats(&ParallelCorpus::default());
        assert_eq!(empty.source.lines, 0);
        assert_eq!(empty.target.tokens, 0);
        assert_eq!(empty.source.mean_len, 0.0);

        let c = ParallelCorpus::from_pairs("en", "ar", [(s("a b"), s("x"))]);
        let st = stats(&c);
        assert_eq!(st.source.tokens, 2);
        assert_eq!(st.target.tokens, 1);
        assert_eq!(st.source.lines, 1);
        assert_eq!(st.target.lines, 1);
        assert!(st.to_key_values().contains("source.tokens=2\n"));
        assert!(st.to_table().contains("en"));
    }

    #[test]
    fn seg_text_and_entities() {
        let m = strip_markup("<seg id=1>hello</seg>");
        assert_eq!(m.segments, vec!["hello"]);
        assert!(m.warnings.is_empty());
        let m = strip_markup("<seg id=2>a &amp; b &lt;c&gt;</seg>");
        assert_eq!(m.segments, vec!["a & b <c>"]);
    }

    #[test]
    fn nested_document() {
        let doc = "<DOC docid=\"x\">\n<HEADLINE>skip me</HEADLINE>\n<p>\n\
                   <seg id=\"1\"> first   line </seg>\n<seg id=\"2\">second <b>bold</b> line</seg>\n\
                   </p>\n</DOC>\n";
        let m = strip_markup(doc);
        assert_eq!(m.segments, vec!["first line", "second bold line"]);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn unbalanced_tags_warn() {
        let m = strip_markup("<seg>a < b</seg>");
        assert_eq!(m.segments, vec!["a < b"]);
        assert_eq!(m.warnings.len(), 1);

        let m = strip_markup("</seg><seg>open");
        assert_eq!(m.segments, vec!["open"]);
        assert_eq!(m.warnings.len(), 2);
    }

    #[test]
    fn documents_without_segments_yield_lines() {
        let m = strip_markup("<doc>\none &amp; two\n\n<p>three</p>\n</doc>");
        assert_eq!(m.segments, vec!["one & two", "three"]);
    }

    fn arb_sentence() -> impl Strategy<Value = Sentence> {
        prop::collection::vec("[a-e]{1,3}", 0..12).prop_map(|t| Sentence::new(t).unwrap())
    }

    fn arb_corpus() -> impl Strategy<Value = ParallelCorpus> {
        prop::collection::vec((arb_sentence(), arb_sentence()), 0..20)
            .prop_map(|pairs| ParallelCorpus::from_pairs("en", "ar", pairs))
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(c in arb_corpus(), max_len in 1usize..12, ratio in 1.0f64..4.0) {
            let p = CleanParams::new(max_len, ratio).unwrap();
            let once = clean(&c, p);
            prop_assert_eq!(clean(&once, p), once.clone());
            prop_assert!(once.pairs().iter().enumerate().all(|(i, pair)| pair.id == i));
        }

        #[test]
        fn stats_are_additive(a in arb_corpus(), b in arb_corpus()) {
            let joined = stats(&a.concat(&b));
            let (sa, sb) = (stats(&a), stats(&b));
            prop_assert_eq!(joined.source.tokens, sa.source.tokens + sb.source.tokens);
            prop_assert_eq!(joined.target.tokens, sa.target.tokens + sb.target.tokens);
            prop_assert_eq!(joined.source.lines, sa.source.lines + sb.source.lines);
            prop_assert_eq!(joined.target.lines, joined.source.lines);
        }
    }
}

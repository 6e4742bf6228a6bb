//! Rule-based Arabic clitic segmentation.
//!
//! Two schemes are supported. [`Scheme::Atb`] splits question, conjunction
//! and particle proclitics plus pronominal enclitics but keeps the definite
//! article attached to its stem. [`Scheme::MyD3`] also splits the article and
//! strips diacritics before normalizing.
//!
//! Split segments carry a `+` marker: proclitics end with it (`w+`),
//! enclitics start with it (`+h`). Splits are chosen by a greedy match over
//! the clitic inventory constrained by a stem lexicon; an analysis is only
//! accepted if [`detokenize`] maps it back to the original surface form.
//!
//! The engine works on plain code points, so the same rules apply to Arabic
//! script and to Buckwalter transliteration given a matching inventory.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// Residual stems outside the lexicon must be longer than this many letters,
/// not counting diacritics.
pub const MIN_STEM_LEN: usize = 2;

const MARKER: char = '+';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Atb,
    MyD3,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "atb" => Ok(Scheme::Atb),
            "myd3" | "d3" => Ok(Scheme::MyD3),
            _ => Err(Error::Parameter(format!("unknown tokenization scheme {s:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Atb => "atb",
            Scheme::MyD3 => "myd3",
        })
    }
}

/// Writing system of the text and inventory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Orthography {
    #[default]
    Arabic,
    Buckwalter,
}

impl FromStr for Orthography {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arabic" | "ar" => Ok(Orthography::Arabic),
            "buckwalter" | "bw" => Ok(Orthography::Buckwalter),
            _ => Err(Error::Parameter(format!("unknown orthography {s:?}"))),
        }
    }
}

impl fmt::Display for Orthography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orthography::Arabic => "arabic",
            Orthography::Buckwalter => "buckwalter",
        })
    }
}

impl Orthography {
    fn is_diacritic(self, c: char) -> bool {
        match self {
            // Nonspacing marks of the Arabic block: harakat, tanween, shadda,
            // sukun, superscript alif and Quranic annotation marks.
            Orthography::Arabic => matches!(c,
                '\u{0610}'..='\u{061A}'
                | '\u{064B}'..='\u{065F}'
                | '\u{0670}'
                | '\u{06D6}'..='\u{06DC}'
                | '\u{06DF}'..='\u{06E4}'
                | '\u{06E7}'..='\u{06E8}'
                | '\u{06EA}'..='\u{06ED}'),
            Orthography::Buckwalter => matches!(c, 'a' | 'u' | 'i' | 'o' | '~' | 'F' | 'N' | 'K' | '`'),
        }
    }

    fn normalize_char(self, c: char) -> char {
        match self {
            Orthography::Arabic => match c {
                '\u{0622}' | '\u{0623}' | '\u{0625}' | '\u{0671}' => '\u{0627}',
                '\u{0649}' | '\u{06CC}' => '\u{064A}',
                other => other,
            },
            Orthography::Buckwalter => match c {
                '>' | '<' | '|' | '{' => 'A',
                'Y' => 'y',
                other => other,
            },
        }
    }

    /// The particle whose combination with the article contracts (l+Al → ll).
    fn contracting_proclitic(self) -> &'static str {
        match self {
            Orthography::Arabic => "\u{0644}",
            Orthography::Buckwalter => "l",
        }
    }

    fn article(self) -> &'static str {
        match self {
            Orthography::Arabic => "\u{0627}\u{0644}",
            Orthography::Buckwalter => "Al",
        }
    }

    fn admits_clitic_char(self, c: char) -> bool {
        match self {
            Orthography::Arabic => ('\u{0600}'..='\u{06FF}').contains(&c),
            Orthography::Buckwalter => c.is_ascii_graphic() && c != MARKER,
        }
    }
}

/// Removes diacritic marks; every other code point is kept.
pub fn dediacritize(text: &str, orthography: Orthography) -> String {
    text.chars().filter(|&c| !orthography.is_diacritic(c)).collect()
}

/// Maps ALIF variants to bare ALIF and ALIF-MAQSURA / dotless YA to YA.
pub fn normalize(text: &str, orthography: Orthography) -> String {
    text.chars().map(|c| orthography.normalize_char(c)).collect()
}

/// The form of a token that [`tokenize`] segments and [`detokenize`] restores.
pub fn scheme_normalize(text: &str, scheme: Scheme, orthography: Orthography) -> String {
    match scheme {
        Scheme::Atb => normalize(text, orthography),
        Scheme::MyD3 => normalize(&dediacritize(text, orthography), orthography),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CliticClass {
    Ques,
    Conj,
    Part,
    Det,
    Enclitic,
}

impl CliticClass {
    fn is_proclitic(self) -> bool {
        self != CliticClass::Enclitic
    }
}

impl FromStr for CliticClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "QUES" => Ok(CliticClass::Ques),
            "CONJ" => Ok(CliticClass::Conj),
            "PART" => Ok(CliticClass::Part),
            "DET" => Ok(CliticClass::Det),
            "ENC" | "PRON" => Ok(CliticClass::Enclitic),
            _ => Err(Error::Parameter(format!("unknown clitic class {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clitic {
    pub surface: String,
    pub class: CliticClass,
}

/// Clitic surface forms grouped by class.
///
/// Proclitics attach in the fixed order QUES, CONJ, PART, DET. Surfaces are
/// stored normalized, so inventories may be written with hamza-carrying
/// ALIF forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliticInventory {
    orthography: Orthography,
    clitics: Vec<Clitic>,
}

const PROCLITIC_SLOTS: [CliticClass; 4] = [
    CliticClass::Ques,
    CliticClass::Conj,
    CliticClass::Part,
    CliticClass::Det,
];

impl CliticInventory {
    pub fn new(orthography: Orthography, clitics: Vec<Clitic>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(clitics.len());
        for clitic in clitics {
            let surface = normalize(&clitic.surface, orthography);
            if surface.is_empty() {
                return Err(Error::Parameter("empty clitic surface".into()));
            }
            if let Some(bad) = surface.chars().find(|&c| !orthography.admits_clitic_char(c)) {
                return Err(Error::Parameter(format!(
                    "clitic {surface:?} contains {bad:?}, not valid in {orthography} orthography"
                )));
            }
            // A surface may be both a proclitic and an enclitic (the two are
            // matched at opposite ends of a word) but not two proclitic classes.
            if !seen.insert((surface.clone(), clitic.class.is_proclitic())) {
                return Err(Error::Parameter(format!(
                    "clitic {surface:?} listed in more than one class"
                )));
            }
            normalized.push(Clitic {
                surface,
                class: clitic.class,
            });
        }
        Ok(CliticInventory {
            orthography,
            clitics: normalized,
        })
    }

    /// Parses `surface<TAB>class` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, orthography: Orthography) -> Result<Self> {
        let mut clitics = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, class) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected surface<TAB>class"))?;
            let class = class
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
            clitics.push(Clitic {
                surface: surface.trim().to_owned(),
                class,
            });
        }
        CliticInventory::new(orthography, clitics).map_err(|e| match e {
            Error::Parameter(m) => Error::parse(0, m),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>, orthography: Orthography) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CliticInventory::parse(&text, orthography)
    }

    /// The shipped inventory for the given orthography.
    pub fn builtin(orthography: Orthography) -> Self {
        let text = match orthography {
            Orthography::Arabic => include_str!("../data/artok/inventory.ar.tsv"),
            Orthography::Buckwalter => include_str!("../data/artok/inventory.bw.tsv"),
        };
        CliticInventory::parse(text, orthography).expect("builtin inventory is well-formed")
    }

    pub fn orthography(&self) -> Orthography {
        self.orthography
    }

    pub fn clitics(&self) -> &[Clitic] {
        &self.clitics
    }

    fn of_class(&self, class: CliticClass) -> impl Iterator<Item = &str> {
        self.clitics
            .iter()
            .filter(move |c| c.class == class)
            .map(|c| c.surface.as_str())
    }
}

/// Known stems, compared without diacritics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    stems: HashSet<String>,
    orthography: Orthography,
}

impl Lexicon {
    pub fn new<I, S>(stems: I, orthography: Orthography) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            stems: stems
                .into_iter()
                .map(|s| normalize(&dediacritize(s.as_ref(), orthography), orthography))
                .filter(|s| !s.is_empty())
                .collect(),
            orthography,
        }
    }

    /// One stem per line; anything after a tab is ignored.
    pub fn parse(text: &str, orthography: Orthography) -> Self {
        Lexicon::new(
            text.lines()
                .filter(|l| !l.starts_with('#'))
                .map(|l| l.split('\t').next().unwrap_or("").trim()),
            orthography,
        )
    }

    pub fn load(path: impl AsRef<Path>, orthography: Orthography) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Lexicon::parse(&text, orthography))
    }

    pub fn contains(&self, stem: &str) -> bool {
        let bare = dediacritize(stem, self.orthography);
        self.stems.contains(&normalize(&bare, self.orthography))
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }
}

/// One word split into marked segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentedToken {
    /// Proclitics in attachment order, without markers.
    pub proclitics: Vec<String>,
    pub stem: String,
    pub enclitics: Vec<String>,
}

impl SegmentedToken {
    fn unsplit(stem: String) -> Self {
        SegmentedToken {
            proclitics: Vec::new(),
            stem,
            enclitics: Vec::new(),
        }
    }

    /// Segments with markers: `p+ ... stem +e ...`.
    pub fn segments(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .proclitics
            .iter()
            .map(|p| format!("{p}{MARKER}"))
            .collect();
        out.push(self.stem.clone());
        out.extend(self.enclitics.iter().map(|e| format!("{MARKER}{e}")));
        out
    }

    pub fn segment_count(&self) -> usize {
        self.proclitics.len() + 1 + self.enclitics.len()
    }
}

/// A candidate decomposition of one word before rendering for a scheme.
#[derive(Clone, Debug)]
struct Analysis<'a> {
    proclitics: Vec<&'a str>,
    has_article: bool,
    /// Stem without the article.
    core: &'a str,
    enclitic: Option<&'a str>,
}

impl Analysis<'_> {
    fn render(&self, scheme: Scheme, orthography: Orthography) -> SegmentedToken {
        let article = orthography.article();
        let mut proclitics: Vec<String> = self.proclitics.iter().map(|p| p.to_string()).collect();
        let stem = match (self.has_article, scheme) {
            (true, Scheme::MyD3) => {
                proclitics.push(article.to_owned());
                self.core.to_owned()
            }
            (true, Scheme::Atb) => format!("{article}{}", self.core),
            (false, _) => self.core.to_owned(),
        };
        SegmentedToken {
            proclitics,
            stem,
            enclitics: self.enclitic.map(str::to_owned).into_iter().collect(),
        }
    }
}

/// Rejoins segments, applying the article contraction after the `l` particle.
fn join_segments(proclitics: &[String], stem: &str, enclitics: &[String], orthography: Orthography) -> String {
    let lam = orthography.contracting_proclitic();
    let article = orthography.article();
    let mut out = String::new();
    let mut after_lam = false;
    for seg in proclitics.iter().map(String::as_str).chain(std::iter::once(stem)) {
        if after_lam && seg.starts_with(article) {
            let first = seg.chars().next().map_or(0, char::len_utf8);
            out.push_str(&seg[first..]);
        } else {
            out.push_str(seg);
        }
        after_lam = seg == lam;
    }
    for e in enclitics {
        out.push_str(e);
    }
    out
}

/// Segments words into clitics and stems for one scheme.
#[derive(Clone, Debug)]
pub struct Tokenizer {
    inventory: CliticInventory,
    lexicon: Lexicon,
}

impl Tokenizer {
    pub fn new(inventory: CliticInventory, lexicon: Lexicon) -> Self {
        Tokenizer { inventory, lexicon }
    }

    pub fn orthography(&self) -> Orthography {
        self.inventory.orthography
    }

    pub fn inventory(&self) -> &CliticInventory {
        &self.inventory
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Enumerates every prefix/suffix decomposition of `word`.
    fn analyses<'a>(&'a self, word: &'a str, sentence_initial: bool) -> Vec<Analysis<'a>> {
        let orth = self.inventory.orthography;
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize, Vec<&'a str>, bool)> = vec![(0, 0, Vec::new(), false)];
        while let Some((slot, pos, procs, article)) = stack.pop() {
            if slot == PROCLITIC_SLOTS.len() {
                let body = &word[pos..];
                if body.is_empty() {
                    continue;
                }
                out.push(Analysis {
                    proclitics: procs.clone(),
                    has_article: article,
                    core: body,
                    enclitic: None,
                });
                for enc in self.inventory.of_class(CliticClass::Enclitic) {
                    if body.len() > enc.len() && body.ends_with(enc) {
                        out.push(Analysis {
                            proclitics: procs.clone(),
                            has_article: article,
                            core: &body[..body.len() - enc.len()],
                            enclitic: Some(enc),
                        });
                    }
                }
                continue;
            }
            let class = PROCLITIC_SLOTS[slot];
            stack.push((slot + 1, pos, procs.clone(), article));
            // The interrogative particle only opens a sentence.
            if class == CliticClass::Ques && !sentence_initial {
                continue;
            }
            let rest = &word[pos..];
            for clitic in self.inventory.of_class(class) {
                if class == CliticClass::Det {
                    // After the l particle the article surfaces without its alif.
                    let surface = if procs.last() == Some(&orth.contracting_proclitic()) {
                        let first = clitic.chars().next().map_or(0, char::len_utf8);
                        &clitic[first..]
                    } else {
                        clitic
                    };
                    if !surface.is_empty() && rest.starts_with(surface) {
                        stack.push((slot + 1, pos + surface.len(), procs.clone(), true));
                    }
                } else if rest.starts_with(clitic) {
                    let mut next = procs.clone();
                    next.push(clitic);
                    stack.push((slot + 1, pos + clitic.len(), next, article));
                }
            }
        }
        out
    }

    /// Segments one already-normalized word.
    pub fn segment_word(&self, word: &str, scheme: Scheme, sentence_initial: bool) -> SegmentedToken {
        let orth = self.inventory.orthography;
        if word.contains(MARKER) || self.lexicon.contains(word) {
            return SegmentedToken::unsplit(word.to_owned());
        }
        // Lower is better: lexicon tier, longest core, fewest segments, text.
        type Rank = (u8, std::cmp::Reverse<usize>, usize, Vec<String>);
        let mut best: Option<(Rank, SegmentedToken)> = None;
        for analysis in self.analyses(word, sentence_initial) {
            if analysis.proclitics.is_empty() && !analysis.has_article && analysis.enclitic.is_none() {
                continue;
            }
            // Under ATB an article-only analysis renders unsplit but still
            // competes, so that it beats readings like A+ l+ for `Al`.
            let seg = analysis.render(scheme, orth);
            let core_len = dediacritize(analysis.core, orth).chars().count();
            let tier = if self.lexicon.contains(analysis.core) {
                0
            } else if core_len > MIN_STEM_LEN {
                1
            } else {
                continue;
            };
            if join_segments(&seg.proclitics, &seg.stem, &seg.enclitics, orth) != word {
                continue;
            }
            let key = (tier, std::cmp::Reverse(core_len), seg.segment_count(), seg.segments());
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, seg));
            }
        }
        best.map(|(_, seg)| seg)
            .unwrap_or_else(|| SegmentedToken::unsplit(word.to_owned()))
    }

    /// Normalizes per scheme and replaces each token by its marked segments.
    pub fn tokenize(&self, sentence: &Sentence, scheme: Scheme) -> Sentence {
        let orth = self.inventory.orthography;
        let mut out = Vec::with_capacity(sentence.len());
        for token in sentence {
            let word = scheme_normalize(token, scheme, orth);
            if word.is_empty() {
                // The token consisted only of diacritics.
                continue;
            }
            let initial = out.is_empty();
            out.extend(self.segment_word(&word, scheme, initial).segments());
        }
        Sentence::from_vec_unchecked(out)
    }
}

/// Free-function form of [`Tokenizer::tokenize`].
pub fn tokenize(
    sentence: &Sentence,
    scheme: Scheme,
    inventory: &CliticInventory,
    lexicon: &Lexicon,
) -> Sentence {
    Tokenizer::new(inventory.clone(), lexicon.clone()).tokenize(sentence, scheme)
}

/// A marker that could not be attached during detokenization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetokenizeWarning {
    /// Token index in the input sentence.
    pub position: usize,
    pub message: String,
}

fn is_proclitic_segment(token: &str) -> bool {
    token.len() > 1 && token.ends_with(MARKER) && !token.starts_with(MARKER)
}

fn is_enclitic_segment(token: &str) -> bool {
    token.len() > 1 && token.starts_with(MARKER) && !token.ends_with(MARKER)
}

/// Rejoins `p+ ... stem +e` runs into surface words.
///
/// The article after the `l` particle contracts (`l+ Al+ ktAb` → `llktAb`);
/// all other segments are concatenated. Dangling markers are stripped and
/// reported.
pub fn detokenize(sentence: &Sentence, orthography: Orthography) -> (Sentence, Vec<DetokenizeWarning>) {
    let mut words: Vec<String> = Vec::with_capacity(sentence.len());
    let mut warnings = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    // Whether the last emitted word may still take enclitics.
    let mut open = false;
    for (position, token) in sentence.iter().enumerate() {
        if is_proclitic_segment(token) {
            pending.push(token[..token.len() - 1].to_owned());
            open = false;
        } else if is_enclitic_segment(token) {
            let enc = token[1..].to_owned();
            if !pending.is_empty() {
                warnings.push(DetokenizeWarning {
                    position,
                    message: format!("enclitic {token:?} follows proclitics without a stem"),
                });
                let stem = pending.pop().unwrap_or_default();
                words.push(join_segments(&pending, &stem, &[enc], orthography));
                pending.clear();
                open = true;
            } else if open {
                words.last_mut().expect("open implies a word").push_str(&enc);
            } else {
                warnings.push(DetokenizeWarning {
                    position,
                    message: format!("enclitic {token:?} has no host word"),
                });
                words.push(enc);
                open = true;
            }
        } else {
            words.push(join_segments(&pending, token, &[], orthography));
            pending.clear();
            open = true;
        }
    }
    if !pending.is_empty() {
        warnings.push(DetokenizeWarning {
            position: sentence.len(),
            message: "proclitics at end of sentence have no stem".into(),
        });
        let stem = pending.pop().unwrap_or_default();
        words.push(join_segments(&pending, &stem, &[], orthography));
    }
    (Sentence::from_vec_unchecked(words), warnings)
}

//! A small synthetic English to Arabic corpus (Buckwalter transliteration)
//! generated from templates: VSO clauses, definite articles, adjective
//! agreement, attached prepositions, possessive suffixes, conjunctions and
//! yes/no questions.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ParallelCorpus, Sentence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Gender {
    M,
    F,
}

struct Noun {
    en: &'static str,
    ar: &'static str,
    gender: Gender,
}

const fn n(en: &'static str, ar: &'static str, gender: Gender) -> Noun {
    Noun { en, ar, gender }
}

const HUMANS: &[Noun] = &[
    n("boy", "wld", Gender::M),
    n("girl", "bnt", Gender::F),
    n("teacher", "mElm", Gender::M),
    n("friend", "Sdyq", Gender::M),
];

const THINGS: &[Noun] = &[
    n("book", "ktAb", Gender::M),
    n("house", "byt", Gender::M),
    n("pen", "qlm", Gender::M),
    n("letter", "rsAlp", Gender::F),
    n("city", "mdynp", Gender::F),
    n("car", "syArp", Gender::F),
    n("door", "bAb", Gender::M),
    n("school", "mdrsp", Gender::F),
    n("market", "swq", Gender::M),
    n("street", "$ArE", Gender::M),
];

const ADJECTIVES: &[(&str, &str)] = &[
    ("big", "kbyr"),
    ("small", "Sgyr"),
    ("new", "jdyd"),
    ("old", "qdym"),
    ("beautiful", "jmyl"),
    ("long", "Twyl"),
];

struct Verb {
    base: &'static str,
    past: &'static str,
    masc: &'static str,
    fem: &'static str,
    objects: &'static [&'static str],
}

const VERBS: &[Verb] = &[
    Verb { base: "write", past: "wrote", masc: "ktb", fem: "ktbt", objects: &["book", "letter"] },
    Verb { base: "read", past: "read", masc: "qrA", fem: "qrAt", objects: &["book", "letter"] },
    Verb { base: "open", past: "opened", masc: "ftH", fem: "ftHt", objects: &["door", "car", "book", "letter"] },
    Verb { base: "buy", past: "bought", masc: "A$trY", fem: "A$trt", objects: &["car", "book", "pen", "house"] },
    Verb { base: "visit", past: "visited", masc: "zAr", fem: "zArt", objects: &["city", "school", "market", "friend", "teacher"] },
    Verb { base: "love", past: "loved", masc: ">Hb", fem: ">Hbt", objects: &["book", "house", "city", "car", "school", "girl", "boy"] },
];

/// (English, Arabic, admissible objects)
const PREPOSITIONS: &[(&str, &str, &[&str])] = &[
    ("in", "fy", &["house", "city", "school", "market", "street"]),
    ("to", "<lY", &["house", "city", "school", "market"]),
    ("from", "mn", &["house", "city", "school", "market"]),
    ("with", "b", &["pen", "car", "friend", "teacher"]),
    ("for", "l", &["teacher", "friend", "boy", "girl"]),
];

const POSSESSIVES: &[(&str, &str)] = &[("his", "h"), ("her", "hA"), ("my", "y"), ("their", "hm")];

fn noun(en: &str) -> &'static Noun {
    HUMANS
        .iter()
        .chain(THINGS)
        .find(|n| n.en == en)
        .expect("noun in vocabulary")
}

fn adjective_form(ar: &str, gender: Gender) -> String {
    match gender {
        Gender::M => ar.to_owned(),
        Gender::F => format!("{ar}p"),
    }
}

/// The stem as it appears before a suffix: feminine `p` becomes `t`.
fn bound_stem(noun: &Noun) -> String {
    match noun.ar.strip_suffix('p') {
        Some(s) => format!("{s}t"),
        None => noun.ar.to_owned(),
    }
}

struct Phrase {
    en: Vec<String>,
    ar: Vec<String>,
}

/// `prefix` is a proclitic written onto the first Arabic word, handling the
/// `l` + `Al` contraction.
fn attach(prefix: &str, word: &str) -> String {
    if prefix == "l" {
        if let Some(rest) = word.strip_prefix("Al") {
            return format!("ll{rest}");
        }
    }
    format!("{prefix}{word}")
}

fn noun_phrase(rng: &mut ChaCha8Rng, noun: &Noun) -> Phrase {
    let adj = if rng.random_bool(0.4) { ADJECTIVES.choose(rng) } else { None };
    let possessive = if noun.en != "boy" && noun.en != "girl" && rng.random_bool(0.25) {
        POSSESSIVES.choose(rng)
    } else {
        None
    };
    let mut en = Vec::new();
    let mut ar = Vec::new();
    match possessive {
        Some((pen, suffix)) => {
            en.push((*pen).to_owned());
            ar.push(format!("{}{suffix}", bound_stem(noun)));
        }
        None => {
            en.push("the".to_owned());
            ar.push(format!("Al{}", noun.ar));
        }
    }
    if let Some((aen, aar)) = adj {
        en.push((*aen).to_owned());
        ar.push(format!("Al{}", adjective_form(aar, noun.gender)));
    }
    en.push(noun.en.to_owned());
    Phrase { en, ar }
}

struct Clause {
    en: Vec<String>,
    ar: Vec<String>,
}

fn clause(rng: &mut ChaCha8Rng, question: bool) -> Clause {
    let verb = if question {
        // Avoid stacking the question alif onto an alif-initial verb.
        let plain: Vec<&Verb> = VERBS.iter().filter(|v| !v.masc.starts_with(['A', '>'])).collect();
        *plain.choose(rng).expect("nonempty")
    } else {
        VERBS.choose(rng).expect("nonempty")
    };
    let subject = HUMANS.choose(rng).expect("nonempty");
    let object = noun(verb.objects.choose(rng).expect("nonempty"));
    let subj = noun_phrase(rng, subject);
    let obj = noun_phrase(rng, object);
    let verb_ar = match subject.gender {
        Gender::M => verb.masc,
        Gender::F => verb.fem,
    };

    let mut en = Vec::new();
    let mut ar = Vec::new();
    if question {
        en.push("did".to_owned());
        en.extend(subj.en);
        en.push(verb.base.to_owned());
        ar.push(format!(">{verb_ar}"));
    } else {
        en.extend(subj.en);
        en.push(verb.past.to_owned());
        ar.push(verb_ar.to_owned());
    }
    ar.extend(subj.ar);
    en.extend(obj.en);
    ar.extend(obj.ar);

    if rng.random_bool(0.35) {
        let (pen, par, objects) = PREPOSITIONS.choose(rng).expect("nonempty");
        let target = noun(objects.choose(rng).expect("nonempty"));
        let np = noun_phrase(rng, target);
        en.push((*pen).to_owned());
        en.extend(np.en);
        let mut words = np.ar.into_iter();
        let head = words.next().expect("noun phrase has a head");
        if par.len() == 1 {
            ar.push(attach(par, &head));
        } else {
            ar.push((*par).to_owned());
            ar.push(head);
        }
        ar.extend(words);
    }
    Clause { en, ar }
}

/// One sentence pair, source side English.
pub fn sentence_pair(rng: &mut ChaCha8Rng) -> (Sentence, Sentence) {
    let question = rng.random_bool(0.1);
    let mut first = clause(rng, question);
    if !question && rng.random_bool(0.2) {
        let second = clause(rng, false);
        first.en.push("and".to_owned());
        first.en.extend(second.en);
        let mut rest = second.ar.into_iter();
        let head = rest.next().expect("clause has a verb");
        first.ar.push(attach("w", &head));
        first.ar.extend(rest);
    }
    let mark = if question { "?" } else { "." };
    first.en.push(mark.to_owned());
    first.ar.push(mark.to_owned());
    (
        Sentence::from_text(&first.en.join(" ")),
        Sentence::from_text(&first.ar.join(" ")),
    )
}

/// Train, dev and test splits from independent draws of one seeded stream.
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
}

pub fn generate(seed: u64, train: usize, dev: usize, test: usize) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |n: usize| {
        let mut c = ParallelCorpus::new("en", "ar");
        for _ in 0..n {
            let (s, t) = sentence_pair(&mut rng);
            c.push(s, t);
        }
        c
    };
    let train = split(train);
    let dev = split(dev);
    let test = split(test);
    ToyCorpus { train, dev, test }
}

/// Every Arabic stem the grammar can produce, one per line order.
pub fn lexicon() -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for noun in HUMANS.iter().chain(THINGS) {
        words.push(noun.ar.to_owned());
        words.push(bound_stem(noun));
    }
    for (_, ar) in ADJECTIVES {
        words.push(adjective_form(ar, Gender::M));
        words.push(adjective_form(ar, Gender::F));
    }
    for v in VERBS {
        words.push(v.masc.to_owned());
        words.push(v.fem.to_owned());
    }
    for (_, ar, _) in PREPOSITIONS {
        if ar.len() > 1 {
            words.push((*ar).to_owned());
        }
    }
    words.sort();
    words.dedup();
    words
}

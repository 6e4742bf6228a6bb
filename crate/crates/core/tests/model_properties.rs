use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smt_core::align::{em_train_traced, TranslationLexicon};
use smt_core::artok::{CliticInventory, Lexicon, Orthography, Scheme, Tokenizer};
use smt_core::corpus::{ParallelCorpus, Sentence};
use smt_core::lm::{train, NGramModel, Smoothing, EOS};
use smt_core::toy;

fn tokenized_train() -> ParallelCorpus {
    let data = toy::generate(9, 300, 0, 0);
    let lex = Lexicon::new(toy::lexicon().iter().map(String::as_str), Orthography::Buckwalter);
    let tok = Tokenizer::new(CliticInventory::builtin(Orthography::Buckwalter), lex);
    ParallelCorpus::from_pairs(
        "en",
        "ar",
        data.train
            .pairs()
            .iter()
            .map(|p| (p.source.clone(), tok.tokenize(&p.target, Scheme::Atb))),
    )
}

fn observed_contexts(corpus: &[Sentence], order: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for s in corpus {
        let mut stream = vec!["<s>".to_string()];
        stream.extend(s.tokens().iter().cloned());
        for end in 1..stream.len() {
            let start = end.saturating_sub(order - 1);
            out.push(stream[start..end].to_vec());
        }
    }
    out.sort();
    out.dedup();
    out
}

fn mass(m: &NGramModel, context: &[String]) -> f64 {
    let ctx: Vec<&str> = context.iter().map(String::as_str).collect();
    m.vocab().iter().map(|(_, w)| 10f64.powf(m.logprob(w, &ctx))).sum()
}

#[test]
fn witten_bell_distributions_sum_to_one() {
    let corpus = tokenized_train();
    let targets: Vec<Sentence> = corpus.targets().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for order in 1..=5 {
        let m = train(&targets, order, Smoothing::WittenBell).unwrap();
        let contexts = observed_contexts(&targets, order);
        for _ in 0..100 {
            let ctx = contexts.choose(&mut rng).unwrap();
            assert!((mass(&m, ctx) - 1.0).abs() < 1e-6, "order {order} context {ctx:?}");
        }
    }
}

#[test]
fn arpa_round_trip_preserves_queries() {
    let corpus = tokenized_train();
    let targets: Vec<Sentence> = corpus.targets().cloned().collect();
    let m = train(&targets, 3, Smoothing::WittenBell).unwrap();
    let back = NGramModel::from_arpa(&m.to_arpa()).unwrap();
    let words: Vec<&str> = m.vocab().iter().map(|(_, w)| w).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let len = rng.random_range(0..=3);
        let ctx: Vec<&str> = (0..len).map(|_| *words.choose(&mut rng).unwrap()).collect();
        let w = *words.choose(&mut rng).unwrap();
        assert!((m.logprob(w, &ctx) - back.logprob(w, &ctx)).abs() < 1e-4);
    }
    assert_eq!(back.to_arpa(), m.to_arpa());
}

#[test]
fn sentence_logprob_is_the_sum_of_word_terms() {
    let corpus = tokenized_train();
    let targets: Vec<Sentence> = corpus.targets().cloned().collect();
    let m = train(&targets, 4, Smoothing::WittenBell).unwrap();
    let words: Vec<&str> = m.vocab().iter().map(|(_, w)| w).filter(|w| *w != "<s>").collect();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..300 {
        let len = rng.random_range(0..=8);
        let toks: Vec<&str> = (0..len).map(|_| *words.choose(&mut rng).unwrap()).collect();
        let s = Sentence::from_text(&toks.join(" "));
        let mut history = vec!["<s>"];
        let mut total = 0.0;
        for w in toks.iter().copied().chain(std::iter::once(EOS)) {
            total += m.logprob(w, &history);
            history.push(w);
        }
        assert_eq!(m.sentence_logprob(&s), total);
    }
}

fn assert_normalized(lex: &TranslationLexicon) {
    for (word, total) in lex.conditional_sums() {
        assert!((total - 1.0).abs() < 1e-6, "{word}: {total}");
    }
}

#[test]
fn model_one_likelihood_rises_and_tables_normalize() {
    let corpus = tokenized_train();
    for c in [corpus.clone(), corpus.reversed()] {
        let trace = em_train_traced(&c, 5).unwrap();
        assert_eq!(trace.log_likelihood.len(), 6);
        for w in trace.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert_normalized(&trace.lexicon);
    }
}

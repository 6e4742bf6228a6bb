mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{exhaustive, max_score, random_instance, random_weights, toy_lm};
use smt_core::decoder::{decode, nbest, DecoderConfig, NUM_FEATURES};

const TOL: f64 = 1e-9;

fn unpruned() -> DecoderConfig {
    DecoderConfig::exhaustive()
}

#[test]
fn unpruned_search_matches_exhaustive_enumeration() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let best = decode(&s, &table, &lm, &w, &unpruned()).unwrap();
        let oracle = exhaustive(&s, &table, &lm, &w, None);
        assert!((best.score - max_score(&oracle)).abs() < TOL, "{s}: {} vs {}", best.score, max_score(&oracle));

        for limit in [0, 1, 2] {
            let cfg = DecoderConfig { distortion_limit: Some(limit), ..unpruned() };
            let got = decode(&s, &table, &lm, &w, &cfg).unwrap();
            let oracle = exhaustive(&s, &table, &lm, &w, Some(limit));
            assert!((got.score - max_score(&oracle)).abs() < TOL, "limit {limit} on {s}");
        }
    }
}

#[test]
fn nbest_matches_per_string_optima() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let oracle = exhaustive(&s, &table, &lm, &w, None);
        let list = nbest(&s, &table, &lm, &w, &unpruned(), 10).unwrap();
        assert_eq!(list.len(), oracle.len().min(10));
        let mut expected: Vec<f64> = oracle.values().copied().collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (t, e) in list.iter().zip(&expected) {
            assert!((t.score - e).abs() < TOL);
            assert!((oracle[&t.target.to_string()] - t.score).abs() < TOL);
        }
        for pair in list.windows(2) {
            assert!(pair[0].score >= pair[1].score);
            assert_ne!(pair[0].target, pair[1].target);
        }
        let one = decode(&s, &table, &lm, &w, &unpruned()).unwrap();
        assert_eq!(one, list[0]);
    }
}

#[test]
fn recombination_does_not_change_the_optimum() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..60 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let with = decode(&s, &table, &lm, &w, &unpruned()).unwrap();
        let without = decode(&s, &table, &lm, &w, &DecoderConfig { recombine: false, ..unpruned() }).unwrap();
        assert!((with.score - without.score).abs() < TOL);
    }
}

#[test]
fn reported_score_and_features_audit() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..60 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        for cfg in [DecoderConfig::default(), unpruned()] {
            for t in nbest(&s, &table, &lm, &w, &cfg, 5).unwrap() {
                assert!((t.score - w.score(&t.features)).abs() < TOL);
                let mut summed = [0.0; NUM_FEATURES];
                for p in &t.phrases {
                    for (acc, f) in summed.iter_mut().zip(&p.features) {
                        *acc += f;
                    }
                }
                for (a, b) in summed.iter().zip(&t.features) {
                    assert!((a - b).abs() < TOL);
                }
                let covered: usize = t.phrases.iter().map(|p| p.source_span.1 - p.source_span.0 + 1).sum();
                assert_eq!(covered, s.len());
            }
        }
    }
}

#[test]
fn tighter_distortion_limit_never_helps() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..60 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let mut previous = f64::INFINITY;
        for limit in [None, Some(4), Some(3), Some(2), Some(1), Some(0)] {
            let cfg = DecoderConfig { distortion_limit: limit, ..unpruned() };
            let score = decode(&s, &table, &lm, &w, &cfg).unwrap().score;
            assert!(score <= previous + TOL);
            previous = score;
        }
    }
}

#[test]
fn argmax_is_invariant_under_positive_scaling() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..60 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let base = decode(&s, &table, &lm, &w, &unpruned()).unwrap();
        for c in [0.1, 10.0] {
            let scaled = decode(&s, &table, &lm, &w.scaled(c).unwrap(), &unpruned()).unwrap();
            assert_eq!(scaled.target, base.target);
        }
    }
}

#[test]
fn pruned_search_is_deterministic_and_bounded_by_the_optimum() {
    let lm = toy_lm();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tight = DecoderConfig { stack_size: 2, beam_threshold: 1.0, distortion_limit: Some(2), recombine: true };
    for _ in 0..60 {
        let (s, table) = random_instance(&mut rng);
        let w = random_weights(&mut rng);
        let a = decode(&s, &table, &lm, &w, &tight).unwrap();
        let b = decode(&s, &table, &lm, &w, &tight).unwrap();
        assert_eq!(a, b);
        let opt = decode(&s, &table, &lm, &w, &unpruned()).unwrap();
        assert!(a.score <= opt.score + TOL);
    }
}

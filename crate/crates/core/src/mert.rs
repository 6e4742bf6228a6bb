//! Weight tuning by exact line search over accumulated n-best lists.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bleu::{corpus_bleu, sentence_stats, BleuStats};
use crate::corpus::Sentence;
use crate::decoder::{dot, nbest_batch, DecoderConfig, Features, Translation, WeightVector, FEATURE_NAMES, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::lm::NGramModel;
use crate::phrase::PhraseTable;

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub target: Sentence,
    pub features: Features,
    pub stats: BleuStats,
}

/// Per-sentence candidate lists, deduplicated by target string.
#[derive(Clone, Debug, Default)]
pub struct NBestPool {
    references: Vec<Vec<Sentence>>,
    entries: Vec<Vec<PoolEntry>>,
    seen: Vec<HashSet<String>>,
}

impl NBestPool {
    /// An empty pool for sentences with the given references.
    pub fn new(references: Vec<Vec<Sentence>>) -> Result<Self> {
        if references.iter().any(Vec::is_empty) {
            return Err(Error::Parameter("every dev sentence needs a reference".into()));
        }
        let n = references.len();
        Ok(NBestPool {
            references,
            entries: vec![Vec::new(); n],
            seen: vec![HashSet::new(); n],
        })
    }

    pub fn num_sentences(&self) -> usize {
        self.entries.len()
    }

    pub fn sentence(&self, i: usize) -> &[PoolEntry] {
        &self.entries[i]
    }

    /// Total candidates over all sentences.
    pub fn size(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    /// Adds a candidate unless its target is already pooled; returns whether
    /// it was new.
    pub fn add(&mut self, sentence: usize, target: Sentence, features: Features) -> Result<bool> {
        if !self.seen[sentence].insert(target.to_string()) {
            return Ok(false);
        }
        let stats = sentence_stats(&target, &self.references[sentence])?;
        self.entries[sentence].push(PoolEntry { target, features, stats });
        Ok(true)
    }

    /// Merges decoder n-best lists; returns the number of new candidates.
    pub fn merge(&mut self, lists: &[Vec<Translation>]) -> Result<usize> {
        if lists.len() != self.num_sentences() {
            return Err(Error::AlignmentMismatch {
                source_lines: lists.len(),
                target_lines: self.num_sentences(),
            });
        }
        let mut added = 0;
        for (i, list) in lists.iter().enumerate() {
            for t in list {
                added += usize::from(self.add(i, t.target.clone(), t.features)?);
            }
        }
        Ok(added)
    }

    /// Index of the best-scoring candidate per sentence, earliest on ties.
    pub fn selection(&self, weights: &WeightVector) -> Vec<usize> {
        self.entries
            .iter()
            .map(|cands| {
                let mut best = 0;
                for k in 1..cands.len() {
                    if weights.score(&cands[k].features) > weights.score(&cands[best].features) {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn stats(&self, weights: &WeightVector) -> BleuStats {
        self.selection(weights)
            .iter()
            .zip(&self.entries)
            .filter(|(_, c)| !c.is_empty())
            .map(|(&k, c)| c[k].stats)
            .sum()
    }

    pub fn bleu(&self, weights: &WeightVector) -> f64 {
        corpus_bleu(&self.stats(weights)).bleu
    }
}

/// A stretch of the line on which every sentence's choice is fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub stats: BleuStats,
    pub bleu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchResult {
    pub direction: Features,
    pub intervals: Vec<Interval>,
    pub step: f64,
    pub bleu: f64,
}

/// Upper envelope of lines `a + b*x` as (start, line index) pieces with the
/// first start at negative infinity.
fn upper_envelope(lines: &[(f64, f64)]) -> Vec<(f64, usize)> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    // Ascending slope; for equal slopes the higher intercept, then the
    // earlier candidate, comes first and the rest are dropped.
    order.sort_by(|&i, &j| {
        lines[i]
            .1
            .total_cmp(&lines[j].1)
            .then(lines[j].0.total_cmp(&lines[i].0))
            .then(i.cmp(&j))
    });
    order.dedup_by(|later, earlier| lines[*later].1 == lines[*earlier].1);

    let mut hull: Vec<(f64, usize)> = Vec::new();
    for &k in &order {
        let (a, b) = lines[k];
        loop {
            let Some(&(start, top)) = hull.last() else {
                hull.push((f64::NEG_INFINITY, k));
                break;
            };
            let (ta, tb) = lines[top];
            // Where the steeper line overtakes the current top.
            let x = (ta - a) / (b - tb);
            if x <= start {
                hull.pop();
            } else {
                hull.push((x, k));
                break;
            }
        }
    }
    hull
}

/// Exact search along `base + step * direction` for the step maximizing
/// corpus BLEU on the pool, optionally restricted to a closed range.
pub fn line_search(
    pool: &NBestPool,
    base: &WeightVector,
    direction: &Features,
    range: Option<(f64, f64)>,
) -> LineSearchResult {
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut initial = BleuStats::default();
    // Candidate each sentence holds as the sweep moves right.
    let mut current = vec![0usize; pool.num_sentences()];
    // (position, sentence, candidate taking over)
    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for (i, cands) in pool.entries.iter().enumerate() {
        if cands.is_empty() {
            continue;
        }
        let lines: Vec<(f64, f64)> = cands
            .iter()
            .map(|c| (base.score(&c.features), dot(direction, &c.features)))
            .collect();
        let hull = upper_envelope(&lines);
        let first = hull.iter().rposition(|&(start, _)| start <= lo).unwrap_or(0);
        current[i] = hull[first].1;
        initial += cands[current[i]].stats;
        for &(x, k) in &hull[first + 1..] {
            if x < hi {
                events.push((x, i, k));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut intervals = Vec::new();
    let mut stats = initial;
    let mut start = lo;
    let mut e = 0;
    while e <= events.len() {
        let end = if e < events.len() { events[e].0 } else { hi };
        if end > start || (e == events.len() && intervals.is_empty()) {
            intervals.push(Interval {
                lo: start,
                hi: end,
                stats,
                bleu: corpus_bleu(&stats).bleu,
            });
        }
        if e == events.len() {
            break;
        }
        // Apply every switch at this position.
        let x = events[e].0;
        while e < events.len() && events[e].0 == x {
            let (_, i, k) = events[e];
            stats = subtract(stats, pool.entries[i][current[i]].stats) + pool.entries[i][k].stats;
            current[i] = k;
            e += 1;
        }
        start = x;
    }

    if intervals.len() == 1 {
        return LineSearchResult {
            direction: *direction,
            step: 0.0,
            bleu: intervals[0].bleu,
            intervals,
        };
    }
    let mut best = 0;
    for (k, iv) in intervals.iter().enumerate() {
        if iv.bleu > intervals[best].bleu {
            best = k;
        }
    }
    let iv = intervals[best];
    let step = match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, true) => 0.5 * (iv.lo + iv.hi),
        (false, true) => iv.hi - 1.0,
        (true, false) => iv.lo + 1.0,
        (false, false) => 0.0,
    };
    LineSearchResult {
        direction: *direction,
        step,
        bleu: iv.bleu,
        intervals,
    }
}

fn subtract(mut a: BleuStats, b: BleuStats) -> BleuStats {
    for n in 0..a.matches.len() {
        a.matches[n] -= b.matches[n];
        a.totals[n] -= b.totals[n];
    }
    a.hyp_len -= b.hyp_len;
    a.ref_len -= b.ref_len;
    a
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MertConfig {
    pub nbest: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Random directions tried per round besides the coordinate axes.
    pub random_directions: usize,
    /// Smallest pool BLEU improvement that counts as progress.
    pub min_gain: f64,
    /// Cap on improving rounds per optimization.
    pub max_rounds: usize,
    pub decoder: DecoderConfig,
}

impl Default for MertConfig {
    fn default() -> Self {
        MertConfig {
            nbest: 100,
            iterations: 10,
            seed: 1,
            random_directions: 8,
            min_gain: 1e-4,
            max_rounds: 50,
            decoder: DecoderConfig::default(),
        }
    }
}

/// A direction label for logs: a feature name or `random#k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub direction: String,
    pub step: f64,
    pub bleu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub weights: WeightVector,
    pub bleu: f64,
    pub moves: Vec<Move>,
}

/// Coordinate and random-direction ascent on pool BLEU from `start`. The
/// result is L1-normalized and never scores below `start` on the pool.
pub fn optimize(pool: &NBestPool, start: &WeightVector, config: &MertConfig, rng: &mut ChaCha8Rng) -> Result<Optimized> {
    let mut current = *start;
    let mut current_bleu = pool.bleu(&current);
    let mut moves = Vec::new();
    for _ in 0..config.max_rounds {
        let mut directions: Vec<(String, Features)> = (0..NUM_FEATURES)
            .map(|k| {
                let mut d = [0.0; NUM_FEATURES];
                d[k] = 1.0;
                (FEATURE_NAMES[k].to_string(), d)
            })
            .collect();
        for r in 0..config.random_directions {
            let d: Features = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
            directions.push((format!("random#{r}"), d));
        }
        let mut best: Option<(String, WeightVector, f64, f64)> = None;
        for (label, d) in &directions {
            let res = line_search(pool, &current, d, None);
            if res.step == 0.0 {
                continue;
            }
            let candidate = current.moved(d, res.step)?;
            // Re-measure rather than trusting the interval statistics.
            let bleu = pool.bleu(&candidate);
            if best.as_ref().is_none_or(|b| bleu > b.2) {
                best = Some((label.clone(), candidate, bleu, res.step));
            }
        }
        match best {
            Some((label, w, bleu, step)) if bleu > current_bleu + config.min_gain => {
                log::debug!("move along {label} by {step}: pool BLEU {current_bleu} -> {bleu}");
                current = w;
                current_bleu = bleu;
                moves.push(Move { direction: label, step, bleu });
            }
            _ => break,
        }
    }
    let normalized = current.l1_normalized();
    let bleu = pool.bleu(&normalized);
    if bleu < current_bleu {
        // Normalization only rescales, so this only happens on exact ties.
        return Ok(Optimized {
            weights: current,
            bleu: current_bleu,
            moves,
        });
    }
    Ok(Optimized {
        weights: normalized,
        bleu,
        moves,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MertIteration {
    pub iteration: usize,
    pub pool_size: usize,
    pub new_entries: usize,
    pub pool_bleu: f64,
    pub moves: Vec<Move>,
}

impl fmt::Display for MertIteration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iteration {} pool_size {} new {} pool_bleu {:.6}",
            self.iteration, self.pool_size, self.new_entries, self.pool_bleu
        )?;
        match self.moves.last() {
            Some(m) => write!(f, " direction {} step {}", m.direction, m.step),
            None => write!(f, " direction none step 0"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MertRun {
    pub weights: WeightVector,
    pub initial_pool_bleu: f64,
    pub final_pool_bleu: f64,
    pub iterations: Vec<MertIteration>,
}

/// Full tuning loop: decode n-best lists, grow the pool, optimize, repeat
/// until the iteration budget runs out or decoding adds nothing new.
pub fn mert(
    sources: &[Sentence],
    references: &[Vec<Sentence>],
    table: &PhraseTable,
    lm: &NGramModel,
    initial: &WeightVector,
    config: &MertConfig,
) -> Result<MertRun> {
    if sources.len() != references.len() {
        return Err(Error::AlignmentMismatch {
            source_lines: sources.len(),
            target_lines: references.len(),
        });
    }
    if config.iterations == 0 {
        return Err(Error::Parameter("MERT needs at least one iteration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = NBestPool::new(references.to_vec())?;
    let mut weights = *initial;
    let mut log = Vec::new();
    for iteration in 1..=config.iterations {
        let lists = nbest_batch(sources, table, lm, &weights, &config.decoder, config.nbest)?;
        let new_entries = pool.merge(&lists)?;
        if new_entries == 0 {
            log::info!("iteration {iteration}: no new candidates, stopping");
            break;
        }
        let start = if pool.bleu(initial) > pool.bleu(&weights) { *initial } else { weights };
        let opt = optimize(&pool, &start, config, &mut rng)?;
        weights = opt.weights;
        let entry = MertIteration {
            iteration,
            pool_size: pool.size(),
            new_entries,
            pool_bleu: opt.bleu,
            moves: opt.moves,
        };
        log::info!("{entry}");
        log.push(entry);
    }
    if pool.bleu(initial) > pool.bleu(&weights) {
        weights = *initial;
    }
    Ok(MertRun {
        weights,
        initial_pool_bleu: pool.bleu(initial),
        final_pool_bleu: pool.bleu(&weights),
        iterations: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: &str) -> Sentence {
        Sentence::from_text(t)
    }

    fn feats(v: &[f64]) -> Features {
        let mut f = [0.0; NUM_FEATURES];
        f[..v.len()].copy_from_slice(v);
        f
    }

    #[test]
    fn envelope_of_crossing_lines() {
        let hull = upper_envelope(&[(0.0, 1.0), (1.0, -1.0), (-5.0, 0.0)]);
        assert_eq!(hull.len(), 2);
        assert_eq!(hull[0], (f64::NEG_INFINITY, 1));
        assert_eq!(hull[1], (0.5, 0));
    }

    #[test]
    fn two_hypotheses_cross_once() {
        let mut pool = NBestPool::new(vec![vec![s("a b c d")]]).unwrap();
        // Good candidate gains along feature 0, bad one is ahead at step 0.
        pool.add(0, s("a b c d"), feats(&[1.0, 0.0])).unwrap();
        pool.add(0, s("x y z w"), feats(&[0.0, 1.0])).unwrap();
        let base = WeightVector::new(feats(&[0.0, 2.0])).unwrap();
        let res = line_search(&pool, &base, &feats(&[1.0]), None);
        // Scores: good = step, bad = 2; they cross at step 2.
        assert_eq!(res.intervals.len(), 2);
        assert_eq!(res.intervals[0].hi, 2.0);
        assert_eq!(res.bleu, 1.0);
        assert_eq!(res.step, 3.0);
    }

    #[test]
    fn degenerate_direction_is_flat() {
        let mut pool = NBestPool::new(vec![vec![s("a b")]]).unwrap();
        pool.add(0, s("a b"), feats(&[1.0, 0.0, 5.0])).unwrap();
        pool.add(0, s("b a"), feats(&[0.0, 1.0, 5.0])).unwrap();
        let res = line_search(&pool, &WeightVector::uniform(), &feats(&[0.0, 0.0, 1.0]), None);
        assert_eq!(res.step, 0.0);
        assert_eq!(res.intervals.len(), 1);
    }

    #[test]
    fn matches_grid_on_three_sentences() {
        let refs = vec![vec![s("a b c")], vec![s("d e f g")], vec![s("h i")]];
        let mut pool = NBestPool::new(refs).unwrap();
        let cands = [
            (0, "a b c", [0.2, -1.0]),
            (0, "a b d", [0.7, -0.5]),
            (0, "c b a", [1.5, -2.0]),
            (1, "d e f g", [-0.3, 1.0]),
            (1, "d e f", [0.4, 0.2]),
            (1, "g f e d", [1.0, -1.5]),
            (2, "h i", [0.0, 0.3]),
            (2, "i h", [0.9, -0.4]),
        ];
        for (i, t, f) in cands {
            pool.add(i, s(t), feats(&f)).unwrap();
        }
        let base = WeightVector::new(feats(&[1.0, 0.5])).unwrap();
        let dir = feats(&[-0.7, 0.3]);
        let res = line_search(&pool, &base, &dir, Some((-5.0, 5.0)));
        let mut grid_best = f64::NEG_INFINITY;
        for k in 0..=10_000 {
            let g = -5.0 + k as f64 * 1e-3;
            grid_best = grid_best.max(pool.bleu(&base.moved(&dir, g).unwrap()));
        }
        assert!((res.bleu - grid_best).abs() < 1e-12);
        assert_eq!(pool.bleu(&base.moved(&dir, res.step).unwrap()), res.bleu);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let mut pool = NBestPool::new(vec![vec![s("a b c")]]).unwrap();
        pool.add(0, s("a b c"), feats(&[1.0])).unwrap();
        pool.add(0, s("c b a"), feats(&[0.0])).unwrap();
        let w = WeightVector::new(feats(&[2.0, 1.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = optimize(&pool, &w, &MertConfig::default(), &mut rng).unwrap();
        assert!(out.moves.is_empty());
        assert_eq!(out.weights, w.l1_normalized());
    }

    #[test]
    fn pool_deduplicates() {
        let mut pool = NBestPool::new(vec![vec![s("a")]]).unwrap();
        assert!(pool.add(0, s("a"), feats(&[1.0])).unwrap());
        assert!(!pool.add(0, s("a"), feats(&[2.0])).unwrap());
        assert_eq!(pool.size(), 1);
    }
}

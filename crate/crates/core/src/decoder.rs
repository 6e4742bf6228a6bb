//! Stack decoding over a phrase table and an n-gram model under an
//! eight-feature log-linear score.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::lm::{NGramModel, WordId};
use crate::phrase::{distortion_cost, PhraseTable};

pub const NUM_FEATURES: usize = 8;

pub type Features = [f64; NUM_FEATURES];

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "lm",
    "phi_t_given_s",
    "lex_t_given_s",
    "phi_s_given_t",
    "lex_s_given_t",
    "distortion",
    "word_penalty",
    "phrase_penalty",
];

pub const LM: usize = 0;
pub const DISTORTION: usize = 5;
pub const WORD_PENALTY: usize = 6;
pub const PHRASE_PENALTY: usize = 7;

/// Extra word-penalty units charged for each source word copied through.
pub const UNKNOWN_WORD_PENALTY: f64 = 10.0;

/// Floor for a single log10 LM term so an unscorable word cannot make the
/// whole search collapse to negative infinity.
const LM_FLOOR_LOG10: f64 = -99.0;

pub fn dot(a: &Features, b: &Features) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &Features, b: &Features) -> Features {
    std::array::from_fn(|k| a[k] + b[k])
}

/// Log-linear weights in [`FEATURE_NAMES`] order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightVector(Features);

impl WeightVector {
    pub fn new(weights: Features) -> Result<Self> {
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Parameter(format!("weight {} is not finite", FEATURE_NAMES[k])));
        }
        Ok(WeightVector(weights))
    }

    /// Every feature weighted 1/8.
    pub fn uniform() -> Self {
        WeightVector([1.0 / NUM_FEATURES as f64; NUM_FEATURES])
    }

    pub fn as_array(&self) -> &Features {
        &self.0
    }

    pub fn score(&self, features: &Features) -> f64 {
        dot(&self.0, features)
    }

    /// Multiplies every weight by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.map(|w| w * c))
    }

    /// `self + step * direction`.
    pub fn moved(&self, direction: &Features, step: f64) -> Result<Self> {
        WeightVector::new(std::array::from_fn(|k| self.0[k] + step * direction[k]))
    }

    /// Rescaled to unit L1 norm; the zero vector is returned unchanged.
    pub fn l1_normalized(&self) -> Self {
        let norm: f64 = self.0.iter().map(|w| w.abs()).sum();
        if norm == 0.0 {
            *self
        } else {
            WeightVector(self.0.map(|w| w / norm))
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        fs::read_to_string(path).map_err(|e| Error::io(path, e))?.parse()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, w) in FEATURE_NAMES.iter().zip(&self.0) {
            writeln!(f, "{name} {w}")?;
        }
        Ok(())
    }
}

impl FromStr for WeightVector {
    type Err = Error;

    /// `name value` lines, each of the eight names exactly once, any order.
    fn from_str(text: &str) -> Result<Self> {
        let mut weights = [None; NUM_FEATURES];
        for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(n, "expected `name value`"));
            };
            let k = FEATURE_NAMES
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| Error::parse(n, format!("unknown weight `{name}`")))?;
            if weights[k].is_some() {
                return Err(Error::parse(n, format!("duplicate weight `{name}`")));
            }
            let v: f64 = value
                .parse()
                .map_err(|_| Error::parse(n, format!("bad value `{value}`")))?;
            weights[k] = Some(v);
        }
        let mut out = [0.0; NUM_FEATURES];
        for k in 0..NUM_FEATURES {
            out[k] = weights[k]
                .ok_or_else(|| Error::Parameter(format!("missing weight `{}`", FEATURE_NAMES[k])))?;
        }
        WeightVector::new(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderConfig {
    /// Histogram pruning limit per stack.
    pub stack_size: usize,
    /// Hypotheses scoring more than this below the stack's best (score plus
    /// future cost, natural log) are dropped. Infinity disables it.
    pub beam_threshold: f64,
    /// Largest allowed jump; `None` is unlimited.
    pub distortion_limit: Option<usize>,
    pub recombine: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            stack_size: 100,
            beam_threshold: 10.0,
            distortion_limit: Some(6),
            recombine: true,
        }
    }
}

impl DecoderConfig {
    /// Exact search: no pruning, no distortion limit.
    pub fn exhaustive() -> Self {
        DecoderConfig {
            stack_size: usize::MAX,
            beam_threshold: f64::INFINITY,
            distortion_limit: None,
            recombine: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stack_size == 0 {
            return Err(Error::Parameter("stack size must be at least 1".into()));
        }
        if self.beam_threshold.is_nan() || self.beam_threshold < 0.0 {
            return Err(Error::Parameter("beam threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// One phrase application in a derivation, in target order.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedPhrase {
    /// Inclusive source span.
    pub source_span: (usize, usize),
    pub target: Vec<String>,
    pub features: Features,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Translation {
    pub target: Sentence,
    pub features: Features,
    pub score: f64,
    pub phrases: Vec<AppliedPhrase>,
}

impl Translation {
    fn empty() -> Self {
        Translation {
            target: Sentence::default(),
            features: [0.0; NUM_FEATURES],
            score: 0.0,
            phrases: Vec::new(),
        }
    }
}

/// A translation option for one source span.
#[derive(Clone, Debug)]
struct TransOpt {
    start: usize,
    end: usize,
    target: Vec<String>,
    ids: Vec<WordId>,
    /// Everything except LM and distortion.
    fixed: Features,
    /// Context-free LM estimate, natural log.
    lm_estimate: f64,
}

fn lm_term(lm: &NGramModel, context: &[WordId], word: WordId) -> f64 {
    lm.logprob_ids(context, word).max(LM_FLOOR_LOG10) * std::f64::consts::LN_10
}

fn collect_options(words: &[String], table: &PhraseTable, lm: &NGramModel) -> Vec<TransOpt> {
    let n = words.len();
    let mut opts = Vec::new();
    for start in 0..n {
        for end in start..n.min(start + table.max_source_len().max(1)) {
            let key = words[start..=end].join(" ");
            if let Some(targets) = table.options(&key) {
                for (target, sc) in targets {
                    let target: Vec<String> = target.split(' ').map(str::to_owned).collect();
                    let mut fixed = [0.0; NUM_FEATURES];
                    fixed[1] = sc.phi_ts.ln();
                    fixed[2] = sc.lex_ts.ln();
                    fixed[3] = sc.phi_st.ln();
                    fixed[4] = sc.lex_st.ln();
                    fixed[WORD_PENALTY] = -(target.len() as f64);
                    fixed[PHRASE_PENALTY] = -1.0;
                    opts.push(TransOpt::new(start, end, target, fixed, lm));
                }
            }
        }
        let has_single = table.options(&words[start]).is_some();
        if !has_single {
            let mut fixed = [0.0; NUM_FEATURES];
            fixed[WORD_PENALTY] = -(1.0 + UNKNOWN_WORD_PENALTY);
            fixed[PHRASE_PENALTY] = -1.0;
            opts.push(TransOpt::new(start, start, vec![words[start].clone()], fixed, lm));
        }
    }
    opts
}

impl TransOpt {
    fn new(start: usize, end: usize, target: Vec<String>, fixed: Features, lm: &NGramModel) -> Self {
        let ids: Vec<WordId> = target.iter().map(|w| lm.word_id(w)).collect();
        let lm_estimate = (0..ids.len()).map(|k| lm_term(lm, &ids[..k], ids[k])).sum();
        TransOpt {
            start,
            end,
            target,
            ids,
            fixed,
            lm_estimate,
        }
    }
}

/// Best achievable score estimate for every half-open source span `[i, j)`.
#[derive(Clone, Debug)]
pub struct FutureCosts {
    n: usize,
    cells: Vec<f64>,
}

impl FutureCosts {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            0.0
        } else {
            self.cells[i * (self.n + 1) + j]
        }
    }

    /// Sum over maximal uncovered runs.
    fn of_coverage(&self, coverage: &Coverage) -> f64 {
        let mut total = 0.0;
        let mut i = 0;
        while i < self.n {
            if coverage.get(i) {
                i += 1;
                continue;
            }
            let start = i;
            while i < self.n && !coverage.get(i) {
                i += 1;
            }
            total += self.get(start, i);
        }
        total
    }
}

fn future_costs_from(n: usize, opts: &[TransOpt], weights: &WeightVector) -> FutureCosts {
    let w = weights.as_array();
    let mut cells = vec![f64::NEG_INFINITY; (n + 1) * (n + 1)];
    for o in opts {
        let s = dot(w, &o.fixed) + w[LM] * o.lm_estimate;
        let cell = &mut cells[o.start * (n + 1) + o.end + 1];
        if s > *cell {
            *cell = s;
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            let mut best = cells[i * (n + 1) + j];
            for k in i + 1..j {
                let split = cells[i * (n + 1) + k] + cells[k * (n + 1) + j];
                if split > best {
                    best = split;
                }
            }
            cells[i * (n + 1) + j] = best;
        }
    }
    FutureCosts { n, cells }
}

/// Future-cost table for `sentence` under the given models and weights.
pub fn future_cost_table(
    sentence: &Sentence,
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
) -> FutureCosts {
    let opts = collect_options(sentence.tokens(), table, lm);
    future_costs_from(sentence.len(), &opts, weights)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Coverage(Vec<u64>);

impl Coverage {
    fn new(n: usize) -> Self {
        Coverage(vec![0; n.div_ceil(64).max(1)])
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn span_free(&self, start: usize, end: usize) -> bool {
        (start..=end).all(|i| !self.get(i))
    }

    fn with_span(&self, start: usize, end: usize) -> Self {
        let mut c = self.clone();
        for i in start..=end {
            c.0[i / 64] |= 1 << (i % 64);
        }
        c
    }
}

#[derive(Clone, Debug)]
struct Arc {
    pred: usize,
    option: usize,
    delta: Features,
}

#[derive(Clone, Debug)]
struct Node {
    coverage: Coverage,
    covered: usize,
    context: Vec<WordId>,
    last_end: i64,
    features: Features,
    score: f64,
    future: f64,
    /// `arcs[0]` is the backpointer; the rest were recombined into this node.
    arcs: Vec<Arc>,
}

impl Node {
    fn total(&self) -> f64 {
        self.score + self.future
    }
}

type StateKey = (Coverage, Vec<WordId>, i64);

struct Search<'a> {
    words: &'a [String],
    opts: Vec<TransOpt>,
    lm: &'a NGramModel,
    weights: WeightVector,
    config: DecoderConfig,
    future: FutureCosts,
    nodes: Vec<Node>,
}

struct Stack {
    members: Vec<usize>,
    index: HashMap<StateKey, usize>,
}

impl Stack {
    fn new() -> Self {
        Stack {
            members: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<'a> Search<'a> {
    fn new(
        words: &'a [String],
        table: &PhraseTable,
        lm: &'a NGramModel,
        weights: WeightVector,
        config: DecoderConfig,
    ) -> Self {
        let opts = collect_options(words, table, lm);
        let future = future_costs_from(words.len(), &opts, &weights);
        Search {
            words,
            opts,
            lm,
            weights,
            config,
            future,
            nodes: Vec::new(),
        }
    }

    fn target_of(&self, mut node: usize) -> Vec<&str> {
        let mut pieces = Vec::new();
        while let Some(arc) = self.nodes[node].arcs.first() {
            pieces.push(&self.opts[arc.option].target);
            node = arc.pred;
        }
        pieces.iter().rev().flat_map(|t| t.iter().map(String::as_str)).collect()
    }

    fn context_window(&self) -> usize {
        self.lm.order() - 1
    }

    /// Returns the final stack's members.
    fn run(&mut self) -> Vec<usize> {
        let n = self.words.len();
        let root_context = if self.context_window() > 0 { vec![self.lm.bos()] } else { Vec::new() };
        let root = Node {
            coverage: Coverage::new(n),
            covered: 0,
            context: root_context,
            last_end: -1,
            features: [0.0; NUM_FEATURES],
            score: 0.0,
            future: self.future.get(0, n),
            arcs: Vec::new(),
        };
        self.nodes.push(root);
        let mut stacks: Vec<Stack> = (0..=n).map(|_| Stack::new()).collect();
        stacks[0].members.push(0);

        for k in 0..n {
            self.prune(&mut stacks[k]);
            let members = std::mem::take(&mut stacks[k].members);
            for &h in &members {
                for o in 0..self.opts.len() {
                    if let Some(child) = self.extend(h, o) {
                        let covered = child.covered;
                        self.insert(&mut stacks[covered], child);
                    }
                }
            }
        }
        let mut last = std::mem::replace(&mut stacks[n], Stack::new());
        self.prune(&mut last);
        last.members
    }

    fn extend(&self, h: usize, o: usize) -> Option<Node> {
        let hyp = &self.nodes[h];
        let opt = &self.opts[o];
        if !hyp.coverage.span_free(opt.start, opt.end) {
            return None;
        }
        let jump = distortion_cost(hyp.last_end, opt.start as i64);
        if let Some(limit) = self.config.distortion_limit {
            if jump > limit as f64 {
                return None;
            }
        }
        let mut delta = opt.fixed;
        delta[DISTORTION] = -jump;
        let window = self.context_window();
        let mut context = hyp.context.clone();
        let mut lm = 0.0;
        for &id in &opt.ids {
            lm += lm_term(self.lm, &context, id);
            context.push(id);
        }
        let covered = hyp.covered + opt.end - opt.start + 1;
        if covered == self.words.len() {
            lm += lm_term(self.lm, &context, self.lm.eos());
        }
        delta[LM] = lm;
        if context.len() > window {
            context.drain(..context.len() - window);
        }
        let coverage = hyp.coverage.with_span(opt.start, opt.end);
        let features = add(&hyp.features, &delta);
        let future = self.future.of_coverage(&coverage);
        Some(Node {
            coverage,
            covered,
            context,
            last_end: opt.end as i64,
            score: self.weights.score(&features),
            features,
            future,
            arcs: vec![Arc { pred: h, option: o, delta }],
        })
    }

    /// Whether a not-yet-stored `node` beats stored hypothesis `other`.
    fn better(&self, node: &Node, other: usize) -> bool {
        match node.score.total_cmp(&self.nodes[other].score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let arc = &node.arcs[0];
                let mut target = self.target_of(arc.pred);
                target.extend(self.opts[arc.option].target.iter().map(String::as_str));
                target.join(" ") < self.target_of(other).join(" ")
            }
        }
    }

    fn insert(&mut self, stack: &mut Stack, node: Node) {
        if self.config.recombine {
            let key = (node.coverage.clone(), node.context.clone(), node.last_end);
            if let Some(&existing) = stack.index.get(&key) {
                if self.better(&node, existing) {
                    let old = std::mem::replace(&mut self.nodes[existing], node);
                    self.nodes[existing].arcs.extend(old.arcs);
                } else {
                    let arc = node.arcs.into_iter().next().expect("new node has an arc");
                    self.nodes[existing].arcs.push(arc);
                }
                return;
            }
            stack.index.insert(key, self.nodes.len());
        }
        stack.members.push(self.nodes.len());
        self.nodes.push(node);
        if self.config.stack_size != usize::MAX && stack.members.len() > self.config.stack_size.saturating_mul(4) {
            self.prune(stack);
        }
    }

    fn prune(&self, stack: &mut Stack) {
        if stack.members.is_empty() {
            return;
        }
        let nodes = &self.nodes;
        stack
            .members
            .sort_by(|&a, &b| nodes[b].total().total_cmp(&nodes[a].total()).then(a.cmp(&b)));
        let best = nodes[stack.members[0]].total();
        let threshold = self.config.beam_threshold;
        if threshold.is_finite() {
            stack.members.retain(|&m| nodes[m].total() >= best - threshold);
        }
        stack.members.truncate(self.config.stack_size);
        if self.config.recombine {
            let keep: std::collections::HashSet<usize> = stack.members.iter().copied().collect();
            stack.index.retain(|_, v| keep.contains(v));
        }
    }

    /// Paths into the final stack in best-first order, deduplicated by target.
    fn paths(&self, finals: &[usize], count: usize) -> Vec<Translation> {
        #[derive(PartialEq)]
        struct Item {
            priority: f64,
            seq: usize,
            node: usize,
            suffix_score: f64,
            /// (node, arc index) pairs walked so far, last arc first.
            suffix: Vec<(usize, usize)>,
        }
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                self.priority
                    .total_cmp(&other.priority)
                    .then_with(|| other.seq.cmp(&self.seq))
            }
        }

        // Near-ties can be misordered by rounding, so keep popping a little
        // past the point where `count` strings are known.
        const SLACK: f64 = 1e-6;
        const MAX_POPS: usize = 200_000;

        let mut heap = BinaryHeap::new();
        let mut seq = 0;
        for &f in finals {
            heap.push(Item {
                priority: self.nodes[f].score,
                seq,
                node: f,
                suffix_score: 0.0,
                suffix: Vec::new(),
            });
            seq += 1;
        }
        let mut found: Vec<Translation> = Vec::new();
        let mut by_target: HashMap<String, usize> = HashMap::new();
        let mut pops = 0;
        while let Some(item) = heap.pop() {
            pops += 1;
            if found.len() >= count {
                let mut scores: Vec<f64> = found.iter().map(|t| t.score).collect();
                scores.sort_by(|a, b| b.total_cmp(a));
                if item.priority < scores[count - 1] - SLACK {
                    break;
                }
            }
            if pops > MAX_POPS {
                break;
            }
            let node = &self.nodes[item.node];
            if node.arcs.is_empty() {
                let t = self.rebuild(&item.suffix);
                let key = t.target.to_string();
                match by_target.get(&key) {
                    Some(&i) => {
                        if t.score > found[i].score {
                            found[i] = t;
                        }
                    }
                    None => {
                        by_target.insert(key, found.len());
                        found.push(t);
                    }
                }
                continue;
            }
            for (a, arc) in node.arcs.iter().enumerate() {
                let suffix_score = item.suffix_score + self.weights.score(&arc.delta);
                let mut suffix = item.suffix.clone();
                suffix.push((item.node, a));
                heap.push(Item {
                    priority: self.nodes[arc.pred].score + suffix_score,
                    seq,
                    node: arc.pred,
                    suffix_score,
                    suffix,
                });
                seq += 1;
            }
        }
        found.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.target.to_string().cmp(&b.target.to_string()))
        });
        found.truncate(count);
        found
    }

    fn rebuild(&self, suffix: &[(usize, usize)]) -> Translation {
        let mut features = [0.0; NUM_FEATURES];
        let mut phrases = Vec::with_capacity(suffix.len());
        let mut words = Vec::new();
        for &(node, a) in suffix.iter().rev() {
            let arc = &self.nodes[node].arcs[a];
            let opt = &self.opts[arc.option];
            features = add(&features, &arc.delta);
            words.extend(opt.target.iter().cloned());
            phrases.push(AppliedPhrase {
                source_span: (opt.start, opt.end),
                target: opt.target.clone(),
                features: arc.delta,
            });
        }
        Translation {
            target: Sentence::from_vec_unchecked(words),
            score: self.weights.score(&features),
            features,
            phrases,
        }
    }
}

/// Up to `n` distinct translations, best first. The first entry is what
/// [`decode`] returns.
pub fn nbest(
    sentence: &Sentence,
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    config: &DecoderConfig,
    n: usize,
) -> Result<Vec<Translation>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Parameter("n-best size must be at least 1".into()));
    }
    if sentence.is_empty() {
        return Ok(vec![Translation::empty()]);
    }
    let mut search = Search::new(sentence.tokens(), table, lm, *weights, *config);
    let mut finals = search.run();
    if finals.is_empty() {
        log::debug!("no complete hypothesis within the distortion limit; decoding monotonically");
        let monotone = DecoderConfig {
            distortion_limit: Some(0),
            ..*config
        };
        search = Search::new(sentence.tokens(), table, lm, *weights, monotone);
        finals = search.run();
    }
    Ok(search.paths(&finals, n))
}

pub fn decode(
    sentence: &Sentence,
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    config: &DecoderConfig,
) -> Result<Translation> {
    let mut list = nbest(sentence, table, lm, weights, config, 1)?;
    Ok(list.remove(0))
}

/// Decodes every sentence in parallel, preserving input order.
pub fn decode_batch(
    sentences: &[Sentence],
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    config: &DecoderConfig,
) -> Result<Vec<Translation>> {
    sentences
        .par_iter()
        .map(|s| decode(s, table, lm, weights, config))
        .collect()
}

/// N-best lists for every sentence in parallel, preserving input order.
pub fn nbest_batch(
    sentences: &[Sentence],
    table: &PhraseTable,
    lm: &NGramModel,
    weights: &WeightVector,
    config: &DecoderConfig,
    n: usize,
) -> Result<Vec<Vec<Translation>>> {
    sentences
        .par_iter()
        .map(|s| nbest(s, table, lm, weights, config, n))
        .collect()
}

/// An n-best line: sentence id, target and features.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestEntry {
    pub id: usize,
    pub target: Sentence,
    pub features: Features,
    pub score: f64,
}

/// `id ||| target ||| f1 ... f8 ||| score` lines.
pub fn format_nbest(id: usize, list: &[Translation]) -> String {
    let mut out = String::new();
    for t in list {
        let feats: Vec<String> = t.features.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(out, "{id} ||| {} ||| {} ||| {}", t.target, feats.join(" "), t.score);
    }
    out
}

pub fn parse_nbest(text: &str) -> Result<Vec<NBestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(n, "expected id ||| target ||| features ||| score"));
        }
        let id = fields[0].parse().map_err(|_| Error::parse(n, "bad sentence id"))?;
        let feats: Vec<f64> = fields[2]
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(n, "bad feature value"))?;
        let features: Features = feats
            .try_into()
            .map_err(|_| Error::parse(n, format!("expected {NUM_FEATURES} features")))?;
        let score = fields[3].parse().map_err(|_| Error::parse(n, "bad score"))?;
        out.push(NBestEntry {
            id,
            target: Sentence::from_text(fields[1]),
            features,
            score,
        });
    }
    Ok(out)
}

//! Stage runner. Each stage reads its inputs from the work directory (or
//! the configured corpora), writes its artifacts under `<work>/<stage>/`
//! and records a manifest of parameters and content hashes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use smt_core::align::{align_corpus, AlignmentMatrix, TranslationLexicon};
use smt_core::artok::{detokenize, CliticInventory, Lexicon, Orthography, Tokenizer};
use smt_core::bleu::{corpus_bleu, corpus_stats, BleuScore};
use smt_core::corpus::{clean, load_parallel, load_sentences, stats, write_sentences, CleanParams, ParallelCorpus, Sentence};
use smt_core::decoder::{decode_batch, WeightVector};
use smt_core::lm::{train, NGramModel};
use smt_core::mert::mert;
use smt_core::phrase::{extract_corpus, score, PhraseTable};

use crate::config::PipelineConfig;
use crate::error::{CliError, InFile, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Tokenize,
    Lm,
    Align,
    Extract,
    Mert,
    Decode,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Tokenize,
        Stage::Lm,
        Stage::Align,
        Stage::Extract,
        Stage::Mert,
        Stage::Decode,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Tokenize => "tokenize",
            Stage::Lm => "lm",
            Stage::Align => "align",
            Stage::Extract => "extract",
            Stage::Mert => "mert",
            Stage::Decode => "decode",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
                CliError::Usage(format!("unknown stage `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

pub const TRAIN_SRC: &str = "tokenize/train.src";
pub const TRAIN_TGT: &str = "tokenize/train.tgt";
pub const DEV_SRC: &str = "tokenize/dev.src";
pub const DEV_TGT: &str = "tokenize/dev.tgt";
pub const TEST_SRC: &str = "tokenize/test.src";
pub const TEST_TGT: &str = "tokenize/test.tgt";
pub const CORPUS_STATS: &str = "tokenize/stats.txt";
pub const LM_ARPA: &str = "lm/model.arpa";
pub const ALIGNMENT: &str = "align/alignment.txt";
pub const LEX_FWD: &str = "align/lex.fwd.tsv";
pub const LEX_BWD: &str = "align/lex.bwd.tsv";
pub const PHRASE_TABLE: &str = "extract/phrase-table.txt";
pub const WEIGHTS: &str = "mert/weights.txt";
pub const MERT_LOG: &str = "mert/run.log";
pub const TRANSLATIONS: &str = "decode/test.tok";
pub const TRANSLATIONS_DETOK: &str = "decode/test.detok";
pub const BASELINE_TRANSLATIONS: &str = "decode/test.uniform.tok";
pub const BLEU_REPORT: &str = "evaluate/bleu.txt";

/// Parameters and content hashes of one stage run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub parameters: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| smt_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Builds a tokenizer from optional inventory and lexicon files.
pub fn build_tokenizer(orthography: Orthography, inventory: Option<&Path>, lexicon: Option<&Path>) -> Result<Tokenizer> {
    let inventory = match inventory {
        Some(p) => CliticInventory::load(p, orthography).in_file(p)?,
        None => CliticInventory::builtin(orthography),
    };
    let lexicon = match lexicon {
        Some(p) => Lexicon::load(p, orthography).in_file(p)?,
        None => Lexicon::new(std::iter::empty::<&str>(), orthography),
    };
    Ok(Tokenizer::new(inventory, lexicon))
}

/// Outcome of a full run.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub tuned: BleuScore,
    pub uniform: BleuScore,
    pub manifests: Vec<Manifest>,
}

pub struct Pipeline {
    config: PipelineConfig,
    work: PathBuf,
}

struct StageRun<'a> {
    pipeline: &'a Pipeline,
    manifest: Manifest,
}

impl StageRun<'_> {
    fn param(&mut self, key: &str, value: impl ToString) {
        self.manifest.parameters.insert(key.to_owned(), value.to_string());
    }

    /// An upstream artifact inside the work directory.
    fn input(&mut self, rel: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.pipeline.work.join(rel);
        if !path.is_file() {
            return Err(CliError::MissingArtifact {
                path,
                stage: producer.name(),
            });
        }
        self.manifest.inputs.insert(rel.to_owned(), sha256_file(&path)?);
        Ok(path)
    }

    /// A file named in the configuration.
    fn external(&mut self, configured: &Path) -> Result<PathBuf> {
        let path = self.pipeline.config.resolve(configured);
        self.manifest
            .inputs
            .insert(configured.display().to_string(), sha256_file(&path)?);
        Ok(path)
    }

    fn output(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.pipeline.work.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| smt_core::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        Ok(path)
    }

    fn finish(mut self, outputs: &[&str]) -> Result<Manifest> {
        for rel in outputs {
            let path = self.pipeline.work.join(rel);
            self.manifest.outputs.insert((*rel).to_owned(), sha256_file(&path)?);
        }
        let text = toml::to_string(&self.manifest).expect("manifest serializes");
        let path = self.output(&format!("{}/manifest.toml", self.manifest.stage))?;
        write_file(&path, &text)?;
        Ok(self.manifest)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        CliError::Core(smt_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn read_parallel(src: &Path, tgt: &Path) -> Result<ParallelCorpus> {
    load_parallel(src, tgt).in_file(src)
}

fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    load_sentences(path).in_file(path)
}

impl Pipeline {
    /// Validates the configuration up front.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let violations = config.validate();
        if !violations.is_empty() {
            return Err(CliError::Config(violations));
        }
        let work = config.work_dir();
        Ok(Pipeline { config, work })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn work_dir(&self) -> &Path {
        &self.work
    }

    pub fn artifact(&self, rel: &str) -> PathBuf {
        self.work.join(rel)
    }

    fn start(&self, stage: Stage) -> StageRun<'_> {
        StageRun {
            pipeline: self,
            manifest: Manifest {
                stage: stage.name().to_owned(),
                ..Manifest::default()
            },
        }
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Manifest> {
        log::info!("stage {stage}");
        match stage {
            Stage::Tokenize => self.tokenize(),
            Stage::Lm => self.lm(),
            Stage::Align => self.align(),
            Stage::Extract => self.extract(),
            Stage::Mert => self.mert(),
            Stage::Decode => self.decode(),
            Stage::Evaluate => self.evaluate(),
        }
    }

    pub fn run_all(&self) -> Result<PipelineReport> {
        let mut manifests = Vec::new();
        for stage in Stage::ALL {
            manifests.push(self.run_stage(stage)?);
        }
        let (tuned, uniform) = self.scores()?;
        Ok(PipelineReport {
            tuned,
            uniform,
            manifests,
        })
    }

    fn tokenize(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Tokenize);
        let scheme = c.scheme()?;
        let orth = c.orthography()?;
        run.param("scheme", scheme);
        run.param("orthography", orth);
        run.param("clean.max_len", c.clean.max_len);
        run.param("clean.max_ratio", c.clean.max_ratio);
        let inventory = c.tokenize.inventory.as_ref().map(|p| run.external(p)).transpose()?;
        let lexicon = c.tokenize.lexicon.as_ref().map(|p| run.external(p)).transpose()?;
        let tokenizer = build_tokenizer(orth, inventory.as_deref(), lexicon.as_deref())?;

        let splits = [
            ("train", &c.corpus.train_source, &c.corpus.train_target, TRAIN_SRC, TRAIN_TGT),
            ("dev", &c.corpus.dev_source, &c.corpus.dev_target, DEV_SRC, DEV_TGT),
            ("test", &c.corpus.test_source, &c.corpus.test_target, TEST_SRC, TEST_TGT),
        ];
        let mut outputs = Vec::new();
        for (name, src, tgt, out_src, out_tgt) in splits {
            let (Some(src), Some(tgt)) = (src, tgt) else { continue };
            let src = run.external(src)?;
            let tgt = run.external(tgt)?;
            let raw = read_parallel(&src, &tgt)?;
            let mut corpus = ParallelCorpus::from_pairs(
                raw.source_lang.clone(),
                raw.target_lang.clone(),
                raw.pairs()
                    .iter()
                    .map(|p| (p.source.clone(), tokenizer.tokenize(&p.target, scheme))),
            );
            if name == "train" {
                let params = CleanParams::new(c.clean.max_len, c.clean.max_ratio)?;
                let before = corpus.len();
                corpus = clean(&corpus, params);
                log::info!("cleaning kept {} of {before} training pairs", corpus.len());
                let stats_path = run.output(CORPUS_STATS)?;
                write_file(&stats_path, &stats(&corpus).to_table())?;
                outputs.push(CORPUS_STATS);
            }
            write_sentences(run.output(out_src)?, corpus.sources())?;
            write_sentences(run.output(out_tgt)?, corpus.targets())?;
            outputs.push(out_src);
            outputs.push(out_tgt);
        }
        run.finish(&outputs)
    }

    fn lm(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Lm);
        run.param("order", c.lm.order);
        run.param("smoothing", c.smoothing()?);
        let input = run.input(TRAIN_TGT, Stage::Tokenize)?;
        let sentences = read_sentences(&input)?;
        let model = train(&sentences, c.lm.order, c.smoothing()?)?;
        model.write_arpa(run.output(LM_ARPA)?)?;
        run.finish(&[LM_ARPA])
    }

    fn align(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Align);
        run.param("iterations", c.align.iterations);
        run.param("heuristic", c.heuristic()?);
        let src = run.input(TRAIN_SRC, Stage::Tokenize)?;
        let tgt = run.input(TRAIN_TGT, Stage::Tokenize)?;
        let corpus = read_parallel(&src, &tgt)?;
        let aligned = align_corpus(&corpus, c.align.iterations, c.heuristic()?)?;
        let text: String = aligned.alignments.iter().map(|a| format!("{a}\n")).collect();
        write_file(&run.output(ALIGNMENT)?, &text)?;
        aligned.forward.write(run.output(LEX_FWD)?)?;
        aligned.backward.write(run.output(LEX_BWD)?)?;
        run.finish(&[ALIGNMENT, LEX_FWD, LEX_BWD])
    }

    fn extract(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Extract);
        run.param("max_len", c.phrase.max_len);
        run.param("table_limit", c.phrase.table_limit);
        let src = run.input(TRAIN_SRC, Stage::Tokenize)?;
        let tgt = run.input(TRAIN_TGT, Stage::Tokenize)?;
        let align_path = run.input(ALIGNMENT, Stage::Align)?;
        let fwd = run.input(LEX_FWD, Stage::Align)?;
        let bwd = run.input(LEX_BWD, Stage::Align)?;
        let corpus = read_parallel(&src, &tgt)?;
        let text = fs::read_to_string(&align_path).map_err(|e| smt_core::Error::Io {
            path: align_path.clone(),
            source: e,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != corpus.len() {
            return Err(CliError::InFile {
                path: align_path,
                source: smt_core::Error::AlignmentMismatch {
                    source_lines: corpus.len(),
                    target_lines: lines.len(),
                },
            });
        }
        let alignments = corpus
            .pairs()
            .iter()
            .zip(&lines)
            .map(|(p, l)| AlignmentMatrix::parse(l, p.id, p.source.len(), p.target.len()))
            .collect::<smt_core::Result<Vec<_>>>()
            .in_file(&align_path)?;
        let forward = TranslationLexicon::load(&fwd).in_file(&fwd)?;
        let backward = TranslationLexicon::load(&bwd).in_file(&bwd)?;
        let pairs = extract_corpus(&corpus, &alignments, c.phrase.max_len)?;
        let table = score(&pairs, &forward, &backward);
        log::info!("{} phrase pairs extracted, {} distinct", pairs.len(), table.len());
        table.write(run.output(PHRASE_TABLE)?, c.phrase.table_limit)?;
        run.finish(&[PHRASE_TABLE])
    }

    fn models(&self, run: &mut StageRun<'_>) -> Result<(PhraseTable, NGramModel)> {
        let table_path = run.input(PHRASE_TABLE, Stage::Extract)?;
        let lm_path = run.input(LM_ARPA, Stage::Lm)?;
        let table = PhraseTable::load(&table_path).in_file(&table_path)?;
        let lm = NGramModel::read_arpa(&lm_path).in_file(&lm_path)?;
        Ok((table, lm))
    }

    fn decoder_params(&self, run: &mut StageRun<'_>) {
        let d = &self.config.decoder;
        run.param("decoder.stack_size", d.stack_size);
        run.param("decoder.beam_threshold", d.beam_threshold);
        run.param("decoder.distortion_limit", d.distortion_limit);
    }

    fn mert(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Mert);
        run.param("enabled", c.mert.enabled);
        run.param("nbest", c.mert.nbest);
        run.param("iterations", c.mert.iterations);
        run.param("random_directions", c.mert.random_directions);
        run.param("min_gain", c.mert.min_gain);
        run.param("seed", c.seed);
        self.decoder_params(&mut run);
        let initial = WeightVector::uniform();
        let (weights, log) = if c.mert.enabled {
            let (table, lm) = self.models(&mut run)?;
            let src = run.input(DEV_SRC, Stage::Tokenize)?;
            let tgt = run.input(DEV_TGT, Stage::Tokenize)?;
            let dev = read_parallel(&src, &tgt)?;
            let sources: Vec<Sentence> = dev.sources().cloned().collect();
            let refs: Vec<Vec<Sentence>> = dev.targets().map(|t| vec![t.clone()]).collect();
            let result = mert(&sources, &refs, &table, &lm, &initial, &c.mert_config())?;
            let mut log: String = result.iterations.iter().map(|it| format!("{it}\n")).collect();
            log.push_str(&format!(
                "initial_pool_bleu {:.6} final_pool_bleu {:.6}\n",
                result.initial_pool_bleu, result.final_pool_bleu
            ));
            (result.weights, log)
        } else {
            (initial, "tuning disabled; uniform weights\n".to_owned())
        };
        weights.write(run.output(WEIGHTS)?)?;
        write_file(&run.output(MERT_LOG)?, &log)?;
        run.finish(&[WEIGHTS, MERT_LOG])
    }

    fn decode(&self) -> Result<Manifest> {
        let c = &self.config;
        let mut run = self.start(Stage::Decode);
        self.decoder_params(&mut run);
        let (table, lm) = self.models(&mut run)?;
        let weights_path = run.input(WEIGHTS, Stage::Mert)?;
        let weights = WeightVector::load(&weights_path).in_file(&weights_path)?;
        let test = read_sentences(&run.input(TEST_SRC, Stage::Tokenize)?)?;
        let config = c.decoder.to_config();
        let orth = c.orthography()?;

        let tuned = decode_batch(&test, &table, &lm, &weights, &config)?;
        let hyps: Vec<Sentence> = tuned.into_iter().map(|t| t.target).collect();
        write_sentences(run.output(TRANSLATIONS)?, &hyps)?;
        let detok: Vec<Sentence> = hyps.iter().map(|h| detokenize(h, orth).0).collect();
        write_sentences(run.output(TRANSLATIONS_DETOK)?, &detok)?;

        let baseline = decode_batch(&test, &table, &lm, &WeightVector::uniform(), &config)?;
        let base: Vec<Sentence> = baseline.into_iter().map(|t| t.target).collect();
        write_sentences(run.output(BASELINE_TRANSLATIONS)?, &base)?;
        run.finish(&[TRANSLATIONS, TRANSLATIONS_DETOK, BASELINE_TRANSLATIONS])
    }

    fn bleu_of(&self, hyp_path: &Path, refs: &[Vec<Sentence>]) -> Result<BleuScore> {
        let hyps = read_sentences(hyp_path)?;
        let stats = corpus_stats(&hyps, refs).in_file(hyp_path)?;
        Ok(corpus_bleu(&stats))
    }

    fn evaluate(&self) -> Result<Manifest> {
        let mut run = self.start(Stage::Evaluate);
        run.param("max_order", smt_core::bleu::MAX_ORDER);
        let hyp = run.input(TRANSLATIONS, Stage::Decode)?;
        let base = run.input(BASELINE_TRANSLATIONS, Stage::Decode)?;
        let refs_path = run.input(TEST_TGT, Stage::Tokenize)?;
        let refs: Vec<Vec<Sentence>> = read_sentences(&refs_path)?.into_iter().map(|r| vec![r]).collect();
        let tuned = self.bleu_of(&hyp, &refs)?;
        let uniform = self.bleu_of(&base, &refs)?;
        write_file(&run.output(BLEU_REPORT)?, &format!("tuned {tuned}\nuniform {uniform}\n"))?;
        run.finish(&[BLEU_REPORT])
    }

    /// Tuned and uniform-weight test BLEU from existing decode artifacts.
    pub fn scores(&self) -> Result<(BleuScore, BleuScore)> {
        let refs_path = self.artifact(TEST_TGT);
        let refs: Vec<Vec<Sentence>> = read_sentences(&refs_path)?.into_iter().map(|r| vec![r]).collect();
        Ok((
            self.bleu_of(&self.artifact(TRANSLATIONS), &refs)?,
            self.bleu_of(&self.artifact(BASELINE_TRANSLATIONS), &refs)?,
        ))
    }
}

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smt_cli::config::PipelineConfig;
use smt_cli::error::{CliError, InFile, Result};
use smt_cli::pipeline::{build_tokenizer, Pipeline, Stage};
use smt_core::align::{align_corpus, AlignmentMatrix, Heuristic, TranslationLexicon};
use smt_core::artok::{detokenize, Orthography, Scheme};
use smt_core::bleu::{corpus_bleu_with_order, corpus_stats, MAX_ORDER};
use smt_core::corpus::{load_parallel, load_sentences, stats, strip_markup, Sentence};
use smt_core::decoder::{decode_batch, format_nbest, nbest_batch, DecoderConfig, WeightVector};
use smt_core::lm::{train, NGramModel, Smoothing};
use smt_core::mert::{mert, MertConfig};
use smt_core::phrase::{extract_corpus, score, PhraseTable, DEFAULT_MAX_PHRASE_LEN, DEFAULT_TABLE_LIMIT};

#[derive(Parser)]
#[command(name = "smt", version, about = "Phrase-based statistical machine translation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment Arabic text into clitics and stems.
    Tokenize(TokenizeArgs),
    /// Rejoin segmented Arabic text.
    Detokenize(DetokenizeArgs),
    /// Extract `<seg>` text from a marked-up document.
    StripMarkup(IoArgs),
    /// Sentence and token counts of a parallel corpus.
    Stats(ParallelArgs),
    /// Train an n-gram model and write it as ARPA.
    TrainLm(TrainLmArgs),
    /// Score sentences with an ARPA model.
    QueryLm(QueryLmArgs),
    /// Word-align a parallel corpus.
    Align(AlignArgs),
    /// Extract and score a phrase table.
    Extract(ExtractArgs),
    /// Translate one sentence per line.
    Decode(DecodeArgs),
    /// Write n-best lists.
    Nbest(NbestArgs),
    /// Tune feature weights on a development set.
    Mert(MertArgs),
    /// Corpus BLEU against one or more references.
    Bleu(BleuArgs),
    /// Run the configured pipeline, or selected stages of it.
    Pipeline(PipelineArgs),
    /// Check a pipeline configuration without running it.
    Validate(ValidateArgs),
    #[command(hide = true)]
    GenerateToy(GenerateToyArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input file (stdin if omitted).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TokenizeArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, default_value = "myd3")]
    scheme: Scheme,
    #[arg(long, default_value = "buckwalter")]
    orthography: Orthography,
    /// Stems that are never split, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Replacement clitic inventory.
    #[arg(long)]
    inventory: Option<PathBuf>,
}

#[derive(Args)]
struct DetokenizeArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, default_value = "buckwalter")]
    orthography: Orthography,
}

#[derive(Args)]
struct ParallelArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct TrainLmArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value = "witten-bell")]
    smoothing: Smoothing,
}

#[derive(Args)]
struct QueryLmArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    corpus: ParallelArgs,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[arg(long, default_value = "grow-diag-final")]
    heuristic: Heuristic,
    /// Directory for alignment.txt, lex.fwd.tsv and lex.bwd.tsv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpus: ParallelArgs,
    #[arg(long)]
    alignment: PathBuf,
    #[arg(long)]
    lex_fwd: PathBuf,
    #[arg(long)]
    lex_bwd: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    max_len: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_LIMIT)]
    table_limit: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    lm: PathBuf,
    #[arg(long, default_value_t = DecoderConfig::default().stack_size)]
    stack_size: usize,
    #[arg(long, default_value_t = DecoderConfig::default().beam_threshold)]
    beam_threshold: f64,
    /// Negative means unlimited.
    #[arg(long, default_value_t = 6, allow_negative_numbers = true)]
    distortion_limit: i64,
}

impl ModelArgs {
    fn config(&self) -> DecoderConfig {
        DecoderConfig {
            stack_size: self.stack_size,
            beam_threshold: self.beam_threshold,
            distortion_limit: usize::try_from(self.distortion_limit).ok(),
            recombine: true,
        }
    }

    fn load(&self) -> Result<(PhraseTable, NGramModel)> {
        let table = PhraseTable::load(&self.table).in_file(&self.table)?;
        let lm = NGramModel::read_arpa(&self.lm).in_file(&self.lm)?;
        Ok((table, lm))
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Weights file (uniform weights if omitted).
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct NbestArgs {
    #[command(flatten)]
    decode: DecodeArgs,
    #[arg(short, long, default_value_t = 100)]
    n: usize,
}

#[derive(Args)]
struct MertArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    dev_source: PathBuf,
    #[arg(long)]
    dev_target: PathBuf,
    /// Starting weights (uniform if omitted).
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(long, default_value_t = MertConfig::default().nbest)]
    nbest: usize,
    #[arg(long, default_value_t = MertConfig::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = MertConfig::default().seed)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BleuArgs {
    /// Hypotheses (stdin if omitted).
    #[arg(long)]
    hyp: Option<PathBuf>,
    /// Reference file; repeat for multiple references.
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    #[arg(long, default_value_t = MAX_ORDER)]
    max_order: usize,
    /// Tokenize hypotheses and references with this scheme first.
    #[arg(long)]
    tokenize: Option<Scheme>,
    #[arg(long, default_value = "buckwalter")]
    orthography: Orthography,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Run only these stages, in the order given.
    #[arg(long)]
    stage: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Args)]
struct GenerateToyArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 800)]
    train: usize,
    #[arg(long, default_value_t = 100)]
    dev: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Core(smt_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(input: Option<&Path>) -> Result<String> {
    match input {
        Some(p) => fs::read_to_string(p).map_err(|e| io_error(p, e)),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Core(smt_core::Error::Stream(e)))?;
            Ok(s)
        }
    }
}

fn read_lines(input: Option<&Path>) -> Result<Vec<Sentence>> {
    match input {
        Some(p) => load_sentences(p).in_file(p),
        None => Ok(read_text(None)?.lines().map(Sentence::from_text).collect()),
    }
}

fn write_text(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Core(smt_core::Error::Stream(e))),
    }
}

fn join_lines<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> String {
    sentences.into_iter().map(|s| format!("{s}\n")).collect()
}

fn load_weights(path: Option<&Path>) -> Result<WeightVector> {
    match path {
        Some(p) => WeightVector::load(p).in_file(p),
        None => Ok(WeightVector::uniform()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tokenize(a) => {
            let tokenizer = build_tokenizer(a.orthography, a.inventory.as_deref(), a.lexicon.as_deref())?;
            let out: Vec<Sentence> = read_lines(a.io.input.as_deref())?
                .iter()
                .map(|s| tokenizer.tokenize(s, a.scheme))
                .collect();
            write_text(a.io.output.as_deref(), &join_lines(&out))
        }
        Command::Detokenize(a) => {
            let mut out = Vec::new();
            for (line, s) in read_lines(a.io.input.as_deref())?.iter().enumerate() {
                let (words, warnings) = detokenize(s, a.orthography);
                for w in warnings {
                    log::warn!("line {}, token {}: {}", line + 1, w.position + 1, w.message);
                }
                out.push(words);
            }
            write_text(a.io.output.as_deref(), &join_lines(&out))
        }
        Command::StripMarkup(a) => {
            let markup = strip_markup(&read_text(a.input.as_deref())?);
            for w in &markup.warnings {
                log::warn!("byte {}: {}", w.offset, w.message);
            }
            let text: String = markup.segments.iter().map(|s| format!("{s}\n")).collect();
            write_text(a.output.as_deref(), &text)
        }
        Command::Stats(a) => {
            let corpus = load_parallel(&a.source, &a.target).in_file(&a.source)?;
            write_text(None, &stats(&corpus).to_table())
        }
        Command::TrainLm(a) => {
            let sentences = read_lines(a.io.input.as_deref())?;
            let model = train(&sentences, a.order, a.smoothing)?;
            write_text(a.io.output.as_deref(), &model.to_arpa())
        }
        Command::QueryLm(a) => {
            let model = NGramModel::read_arpa(&a.model).in_file(&a.model)?;
            let sentences = read_lines(a.io.input.as_deref())?;
            let mut out = String::new();
            for s in &sentences {
                out.push_str(&format!("{:.6}\n", model.sentence_logprob(s)));
            }
            out.push_str(&format!("perplexity {:.4}\n", model.perplexity(&sentences)?));
            write_text(a.io.output.as_deref(), &out)
        }
        Command::Align(a) => {
            let corpus = load_parallel(&a.corpus.source, &a.corpus.target).in_file(&a.corpus.source)?;
            let aligned = align_corpus(&corpus, a.iterations, a.heuristic)?;
            fs::create_dir_all(&a.out_dir).map_err(|e| io_error(&a.out_dir, e))?;
            let text: String = aligned.alignments.iter().map(|m| format!("{m}\n")).collect();
            write_text(Some(&a.out_dir.join("alignment.txt")), &text)?;
            aligned.forward.write(a.out_dir.join("lex.fwd.tsv"))?;
            aligned.backward.write(a.out_dir.join("lex.bwd.tsv"))?;
            Ok(())
        }
        Command::Extract(a) => {
            let corpus = load_parallel(&a.corpus.source, &a.corpus.target).in_file(&a.corpus.source)?;
            let text = read_text(Some(&a.alignment))?;
            let alignments = corpus
                .pairs()
                .iter()
                .zip(text.lines())
                .map(|(p, l)| AlignmentMatrix::parse(l, p.id, p.source.len(), p.target.len()))
                .collect::<smt_core::Result<Vec<_>>>()
                .in_file(&a.alignment)?;
            let forward = TranslationLexicon::load(&a.lex_fwd).in_file(&a.lex_fwd)?;
            let backward = TranslationLexicon::load(&a.lex_bwd).in_file(&a.lex_bwd)?;
            let pairs = extract_corpus(&corpus, &alignments, a.max_len).in_file(&a.alignment)?;
            score(&pairs, &forward, &backward).write(&a.output, a.table_limit)?;
            Ok(())
        }
        Command::Decode(a) => {
            let (table, lm) = a.model.load()?;
            let weights = load_weights(a.weights.as_deref())?;
            let input = read_lines(a.io.input.as_deref())?;
            let out = decode_batch(&input, &table, &lm, &weights, &a.model.config())?;
            write_text(a.io.output.as_deref(), &join_lines(out.iter().map(|t| &t.target)))
        }
        Command::Nbest(a) => {
            let d = &a.decode;
            let (table, lm) = d.model.load()?;
            let weights = load_weights(d.weights.as_deref())?;
            let input = read_lines(d.io.input.as_deref())?;
            let lists = nbest_batch(&input, &table, &lm, &weights, &d.model.config(), a.n)?;
            let text: String = lists.iter().enumerate().map(|(i, l)| format_nbest(i, l)).collect();
            write_text(d.io.output.as_deref(), &text)
        }
        Command::Mert(a) => {
            let (table, lm) = a.model.load()?;
            let dev = load_parallel(&a.dev_source, &a.dev_target).in_file(&a.dev_source)?;
            let sources: Vec<Sentence> = dev.sources().cloned().collect();
            let refs: Vec<Vec<Sentence>> = dev.targets().map(|t| vec![t.clone()]).collect();
            let initial = load_weights(a.initial.as_deref())?;
            let config = MertConfig {
                nbest: a.nbest,
                iterations: a.iterations,
                seed: a.seed,
                decoder: a.model.config(),
                ..MertConfig::default()
            };
            let result = mert(&sources, &refs, &table, &lm, &initial, &config)?;
            for it in &result.iterations {
                log::info!("{it}");
            }
            result.weights.write(&a.output)?;
            Ok(())
        }
        Command::Bleu(a) => {
            let prepare = |mut s: Vec<Sentence>| -> Result<Vec<Sentence>> {
                if let Some(scheme) = a.tokenize {
                    let tokenizer = build_tokenizer(a.orthography, None, None)?;
                    s = s.iter().map(|x| tokenizer.tokenize(x, scheme)).collect();
                }
                Ok(s)
            };
            let hyps = prepare(read_lines(a.hyp.as_deref())?)?;
            let mut refs: Vec<Vec<Sentence>> = vec![Vec::new(); hyps.len()];
            for path in &a.refs {
                let lines = prepare(load_sentences(path).in_file(path)?)?;
                if lines.len() != hyps.len() {
                    return Err(CliError::InFile {
                        path: path.clone(),
                        source: smt_core::Error::AlignmentMismatch {
                            source_lines: hyps.len(),
                            target_lines: lines.len(),
                        },
                    });
                }
                for (r, l) in refs.iter_mut().zip(lines) {
                    r.push(l);
                }
            }
            if !(1..=MAX_ORDER).contains(&a.max_order) {
                return Err(CliError::Usage(format!("--max-order must be in 1..={MAX_ORDER}")));
            }
            let stats = corpus_stats(&hyps, &refs)?;
            write_text(None, &format!("{}\n", corpus_bleu_with_order(&stats, a.max_order)))
        }
        Command::Pipeline(a) => {
            let pipeline = Pipeline::new(PipelineConfig::load(&a.config)?)?;
            if a.stage.is_empty() {
                let report = pipeline.run_all()?;
                write_text(None, &format!("tuned   {}\nuniform {}\n", report.tuned, report.uniform))
            } else {
                let stages = a.stage.iter().map(|s| s.parse()).collect::<Result<Vec<Stage>>>()?;
                for stage in stages {
                    pipeline.run_stage(stage)?;
                }
                Ok(())
            }
        }
        Command::Validate(a) => {
            let config = PipelineConfig::load(&a.config)?;
            let violations = config.validate();
            if violations.is_empty() {
                write_text(None, "configuration is valid\n")
            } else {
                Err(CliError::Config(violations))
            }
        }
        Command::GenerateToy(a) => {
            let toy = smt_core::toy::generate(a.seed, a.train, a.dev, a.test);
            fs::create_dir_all(&a.out_dir).map_err(|e| io_error(&a.out_dir, e))?;
            for (name, split) in [("train", &toy.train), ("dev", &toy.dev), ("test", &toy.test)] {
                write_text(Some(&a.out_dir.join(format!("{name}.en"))), &join_lines(split.sources()))?;
                write_text(Some(&a.out_dir.join(format!("{name}.ar"))), &join_lines(split.targets()))?;
            }
            let lexicon: String = smt_core::toy::lexicon().iter().map(|w| format!("{w}\n")).collect();
            write_text(Some(&a.out_dir.join("lexicon.txt")), &lexicon)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

//! Pipeline configuration: a TOML file with one table per stage. Every key
//! is optional and falls back to the default shown in `smt.toml.example`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use smt_core::align::Heuristic;
use smt_core::artok::{Orthography, Scheme};
use smt_core::corpus::CleanParams;
use smt_core::decoder::DecoderConfig;
use smt_core::lm::{Smoothing, MAX_ORDER};
use smt_core::mert::MertConfig;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub train_source: Option<PathBuf>,
    pub train_target: Option<PathBuf>,
    pub dev_source: Option<PathBuf>,
    pub dev_target: Option<PathBuf>,
    pub test_source: Option<PathBuf>,
    pub test_target: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizeSection {
    /// `atb` or `myd3`; applied to the target (Arabic) side.
    pub scheme: String,
    /// `buckwalter` or `arabic`.
    pub orthography: String,
    /// Stems that must never be split, one per line.
    pub lexicon: Option<PathBuf>,
    /// Replacement clitic inventory (`surface<TAB>class`).
    pub inventory: Option<PathBuf>,
}

impl Default for TokenizeSection {
    fn default() -> Self {
        TokenizeSection {
            scheme: "myd3".into(),
            orthography: "buckwalter".into(),
            lexicon: None,
            inventory: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanSection {
    pub max_len: usize,
    pub max_ratio: f64,
}

impl Default for CleanSection {
    fn default() -> Self {
        let d = CleanParams::default();
        CleanSection {
            max_len: d.max_len,
            max_ratio: d.max_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub order: usize,
    pub smoothing: String,
}

impl Default for LmSection {
    fn default() -> Self {
        LmSection {
            order: 5,
            smoothing: "witten-bell".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignSection {
    pub iterations: usize,
    pub heuristic: String,
}

impl Default for AlignSection {
    fn default() -> Self {
        AlignSection {
            iterations: 5,
            heuristic: "grow-diag-final".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhraseSection {
    pub max_len: usize,
    pub table_limit: usize,
}

impl Default for PhraseSection {
    fn default() -> Self {
        PhraseSection {
            max_len: smt_core::phrase::DEFAULT_MAX_PHRASE_LEN,
            table_limit: smt_core::phrase::DEFAULT_TABLE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderSection {
    pub stack_size: usize,
    pub beam_threshold: f64,
    /// Negative means unlimited.
    pub distortion_limit: i64,
}

impl Default for DecoderSection {
    fn default() -> Self {
        let d = DecoderConfig::default();
        DecoderSection {
            stack_size: d.stack_size,
            beam_threshold: d.beam_threshold,
            distortion_limit: d.distortion_limit.map_or(-1, |l| l as i64),
        }
    }
}

impl DecoderSection {
    pub fn to_config(&self) -> DecoderConfig {
        DecoderConfig {
            stack_size: self.stack_size,
            beam_threshold: self.beam_threshold,
            distortion_limit: usize::try_from(self.distortion_limit).ok(),
            recombine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MertSection {
    pub enabled: bool,
    pub nbest: usize,
    pub iterations: usize,
    pub random_directions: usize,
    pub min_gain: f64,
}

impl Default for MertSection {
    fn default() -> Self {
        let d = MertConfig::default();
        MertSection {
            enabled: true,
            nbest: d.nbest,
            iterations: d.iterations,
            random_directions: d.random_directions,
            min_gain: d.min_gain,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    pub seed: u64,
    pub corpus: CorpusSection,
    pub tokenize: TokenizeSection,
    pub clean: CleanSection,
    pub lm: LmSection,
    pub align: AlignSection,
    pub phrase: PhraseSection,
    pub decoder: DecoderSection,
    pub mert: MertSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            work_dir: PathBuf::from("work"),
            seed: 1,
            corpus: CorpusSection::default(),
            tokenize: TokenizeSection::default(),
            clean: CleanSection::default(),
            lm: LmSection::default(),
            align: AlignSection::default(),
            phrase: PhraseSection::default(),
            decoder: DecoderSection::default(),
            mert: MertSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// One problem found by [`PipelineConfig::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| {
            CliError::Config(vec![Violation {
                key: "syntax".into(),
                message: e.message().to_owned(),
            }])
        })?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| smt_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::parse(&text, base)
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn work_dir(&self) -> PathBuf {
        self.resolve(&self.work_dir)
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        self.tokenize.scheme.parse().map_err(CliError::from)
    }

    pub fn orthography(&self) -> Result<Orthography, CliError> {
        self.tokenize.orthography.parse().map_err(CliError::from)
    }

    pub fn smoothing(&self) -> Result<Smoothing, CliError> {
        self.lm.smoothing.parse().map_err(CliError::from)
    }

    pub fn heuristic(&self) -> Result<Heuristic, CliError> {
        self.align.heuristic.parse().map_err(CliError::from)
    }

    pub fn mert_config(&self) -> MertConfig {
        MertConfig {
            nbest: self.mert.nbest,
            iterations: self.mert.iterations,
            seed: self.seed,
            random_directions: self.mert.random_directions,
            min_gain: self.mert.min_gain,
            decoder: self.decoder.to_config(),
            ..MertConfig::default()
        }
    }

    /// Every violation, in key order of the file.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |key: &str, message: String| {
            out.push(Violation {
                key: key.to_owned(),
                message,
            })
        };
        let c = &self.corpus;
        let corpora = [
            ("corpus.train_source", &c.train_source, true),
            ("corpus.train_target", &c.train_target, true),
            ("corpus.dev_source", &c.dev_source, self.mert.enabled),
            ("corpus.dev_target", &c.dev_target, self.mert.enabled),
            ("corpus.test_source", &c.test_source, true),
            ("corpus.test_target", &c.test_target, true),
        ];
        for (key, path, required) in corpora {
            match path {
                Some(p) if !self.resolve(p).is_file() => {
                    bad(key, format!("file {} does not exist", self.resolve(p).display()))
                }
                None if required => {
                    let why = if key.starts_with("corpus.dev") { " (needed by MERT)" } else { "" };
                    bad(key, format!("missing{why}"))
                }
                _ => {}
            }
        }
        if let Err(e) = self.tokenize.scheme.parse::<Scheme>() {
            bad("tokenize.scheme", e.to_string());
        }
        if let Err(e) = self.tokenize.orthography.parse::<Orthography>() {
            bad("tokenize.orthography", e.to_string());
        }
        for (key, path) in [("tokenize.lexicon", &self.tokenize.lexicon), ("tokenize.inventory", &self.tokenize.inventory)] {
            if let Some(p) = path {
                if !self.resolve(p).is_file() {
                    bad(key, format!("file {} does not exist", self.resolve(p).display()));
                }
            }
        }
        if let Err(e) = CleanParams::new(self.clean.max_len, self.clean.max_ratio) {
            bad("clean", e.to_string());
        }
        if !(1..=MAX_ORDER).contains(&self.lm.order) {
            bad("lm.order", format!("must be in 1..={MAX_ORDER}, got {}", self.lm.order));
        }
        if let Err(e) = self.lm.smoothing.parse::<Smoothing>() {
            bad("lm.smoothing", e.to_string());
        }
        if self.align.iterations == 0 {
            bad("align.iterations", "must be at least 1".into());
        }
        if let Err(e) = self.align.heuristic.parse::<Heuristic>() {
            bad("align.heuristic", e.to_string());
        }
        if self.phrase.max_len == 0 {
            bad("phrase.max_len", "must be at least 1".into());
        }
        if self.phrase.table_limit == 0 {
            bad("phrase.table_limit", "must be at least 1".into());
        }
        if self.decoder.stack_size == 0 {
            bad("decoder.stack_size", "must be at least 1".into());
        }
        if self.decoder.beam_threshold.is_nan() || self.decoder.beam_threshold < 0.0 {
            bad("decoder.beam_threshold", "must be non-negative".into());
        }
        if self.mert.enabled {
            if self.mert.nbest == 0 {
                bad("mert.nbest", "must be at least 1".into());
            }
            if self.mert.iterations == 0 {
                bad("mert.iterations", "must be at least 1".into());
            }
            if self.mert.min_gain.is_nan() || self.mert.min_gain < 0.0 {
                bad("mert.min_gain", "must be non-negative".into());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["tr.en", "tr.ar", "dv.en", "dv.ar", "te.en", "te.ar"] {
            fs::write(dir.path().join(f), "a\n").unwrap();
        }
        dir
    }

    const CORPUS: &str = r#"
[corpus]
train_source = "tr.en"
train_target = "tr.ar"
dev_source = "dv.en"
dev_target = "dv.ar"
test_source = "te.en"
test_target = "te.ar"
"#;

    #[test]
    fn valid_config_has_no_violations() {
        let dir = valid_dir();
        let c = PipelineConfig::parse(CORPUS, dir.path()).unwrap();
        assert_eq!(c.validate(), Vec::new());
        assert_eq!(c.lm.order, 5);
    }

    #[test]
    fn order_six_is_rejected() {
        let dir = valid_dir();
        let c = PipelineConfig::parse(&format!("{CORPUS}\n[lm]\norder = 6\n"), dir.path()).unwrap();
        let v = c.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "lm.order");
        assert!(v[0].message.contains("1..=5"));
    }

    #[test]
    fn missing_dev_with_mert() {
        let dir = valid_dir();
        let text = CORPUS.replace("dev_source = \"dv.en\"\n", "");
        let c = PipelineConfig::parse(&text, dir.path()).unwrap();
        let v = c.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "corpus.dev_source");
        let c = PipelineConfig::parse(&format!("{text}\n[mert]\nenabled = false\n"), dir.path()).unwrap();
        assert!(c.validate().is_empty());
    }

    #[test]
    fn reports_every_violation() {
        let dir = valid_dir();
        let text = format!("{CORPUS}\n[lm]\norder = 0\nsmoothing = \"kn\"\n[align]\niterations = 0\n");
        let c = PipelineConfig::parse(&text, dir.path()).unwrap();
        let keys: Vec<String> = c.validate().into_iter().map(|v| v.key).collect();
        assert_eq!(keys, ["lm.order", "lm.smoothing", "align.iterations"]);
    }

    #[test]
    fn example_file_lists_the_defaults() {
        let text = include_str!("../../../smt.toml.example");
        assert_eq!(PipelineConfig::parse(text, ".").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(PipelineConfig::parse("[lm]\nordr = 3\n", ".").is_err());
    }
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use smt_cli::config::PipelineConfig;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_dir() -> PathBuf {
    repo_root().join("data/toy")
}

/// The shipped toy configuration with its work directory moved to `work`.
pub fn toy_config(work: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::load(toy_dir().join("pipeline.toml")).unwrap();
    config.work_dir = work.to_path_buf();
    config
}

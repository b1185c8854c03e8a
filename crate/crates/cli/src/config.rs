//! Settings shared by all subcommands, loadable from a JSON file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rodfind_core::dataset::{CorpusConfig, DEFAULT_MIN_COUNT};
use rodfind_core::retrieval::DEFAULT_K;
use rodfind_core::training::TrainerConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default data root.
pub const DATA_DIR_ENV: &str = "RODFIND_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Seeds both corpus generation and training when set.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub corpus: CorpusConfig,
    pub train: TrainerConfig,
    /// Minimum train-split word count for the vocabulary.
    pub min_count: usize,
    pub k: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: None,
            threads: None,
            data_dir: None,
            corpus: CorpusConfig::default(),
            train: TrainerConfig::default(),
            min_count: DEFAULT_MIN_COUNT,
            k: DEFAULT_K,
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flag, then config file, then `RODFIND_DATA_DIR`, then `./data`.
    pub fn data_root(&self) -> PathBuf {
        self.data_dir.clone().or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("data"))
    }

    /// Propagates the global seed into the per-module configs.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.corpus.seed = seed;
            self.train.seed = seed;
        }
    }

    pub fn default_dataset_dir(&self) -> PathBuf {
        self.data_root().join("dataset")
    }

    pub fn default_manifest(&self) -> PathBuf {
        self.default_dataset_dir().join(rodfind_core::dataset::MANIFEST_FILE)
    }

    pub fn default_checkpoint(&self) -> PathBuf {
        self.data_root().join("model.ckpt")
    }

    pub fn default_index(&self) -> PathBuf {
        self.data_root().join("index.bin")
    }
}

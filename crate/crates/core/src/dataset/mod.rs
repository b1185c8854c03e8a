//! Paired text/voxel corpus: generation, vocabulary, tokenization and
//! on-disk formats.

mod bases;
mod manifest;
mod nrrd;
pub mod sizes;
mod variants;
mod vocab;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, DEFAULT_RESOLUTION};
use crate::taxonomy::TaxonomyError;

pub use bases::{default_bases, BaseRod};
pub use manifest::{
    manifest_from_csv, manifest_to_csv, read_manifest, split, write_corpus, write_manifest, CorpusMeta,
    DatasetManifest, ManifestRow, Split, SplitAssignment, GRID_DIR, MANIFEST_FILE, METADATA_FILE,
};
pub use nrrd::{read_nrrd, write_nrrd};
pub use sizes::concrete_sizes;
pub use variants::{counts_for_total, generate_variants, size_combinations, Sample};
pub use vocab::{
    build_vocabulary, tokenize, words, TokenSequence, Vocabulary, DEFAULT_MIN_COUNT, MAX_TOKENS, PAD, PAD_TOKEN,
    UNK, UNK_TOKEN,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("NRRD field `{field}`: {message}")]
    Nrrd { field: String, message: String },
    #[error("NRRD payload has {actual} bytes, header declares {expected}")]
    NrrdSize { expected: usize, actual: usize },
    #[error("manifest: {0}")]
    Csv(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("missing grid files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),
    #[error("base {base}: {requested} variants requested but only {max} distinct size-class combinations exist")]
    TooManyVariants { base: String, requested: usize, max: usize },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        DatasetError::Csv(e.to_string())
    }
}

/// Corpus generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Number of shipped bases used, taken in order.
    pub bases: usize,
    pub total: usize,
    pub seed: u64,
    pub resolution: usize,
    pub val_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { bases: 15, total: 1000, seed: 7, resolution: DEFAULT_RESOLUTION, val_fraction: 0.1 }
    }
}

/// Generated samples plus their split.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub split: SplitAssignment,
    pub meta: CorpusMeta,
}

/// Generates `total` samples spread evenly over the first `bases` shipped
/// bases and splits them stratified by base.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Corpus, DatasetError> {
    let all = default_bases();
    if config.bases == 0 || config.bases > all.len() {
        return Err(DatasetError::Config(format!("bases must be in 1..={}, got {}", all.len(), config.bases)));
    }
    let bases = &all[..config.bases];
    let counts = counts_for_total(config.total, bases.len());
    let samples = generate_variants(bases, &counts, config.seed, config.resolution)?;
    let groups: Vec<&str> = samples.iter().map(|s| s.base.as_str()).collect();
    let split = split(&groups, config.val_fraction, config.seed)?;
    let meta = CorpusMeta {
        schema_version: crate::taxonomy::FeatureSchema::linking_rod().version,
        resolution: config.resolution,
        seed: config.seed,
        bases: bases.iter().map(|b| b.code.clone()).collect(),
        val_fraction: config.val_fraction,
    };
    Ok(Corpus { samples, split, meta })
}

impl Corpus {
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest, DatasetError> {
        write_corpus(dir, &self.samples, &self.split.tags(self.samples.len()), &self.meta)
    }
}

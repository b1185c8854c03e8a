//! Shape gallery index, exact text-to-shape queries and voxel previews.

mod index;
mod preview;

use std::path::PathBuf;

use thiserror::Error;

pub use index::{build_index, GalleryItem, IndexEntry, QueryHit, QueryResult, Retriever, ShapeIndex, DEFAULT_K, INDEX_FORMAT, INDEX_VERSION};
pub use preview::{export_preview, PreviewFormat};

use crate::encoders::EncoderError;
use crate::taxonomy::TaxonomyError;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the gallery is empty")]
    EmptyGallery,
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("sample {id}: grid resolution {actual} does not match the encoder's {expected}")]
    Resolution { id: String, expected: usize, actual: usize },
    #[error("index was built from checkpoint {index} but the query checkpoint is {checkpoint}")]
    FingerprintMismatch { index: String, checkpoint: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("query text: {0}")]
    Text(#[from] TaxonomyError),
}

//! Persisted gallery embeddings and exact nearest-shape queries.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::dataset::{tokenize, words, UNK};
use crate::encoders::{Checkpoint, ShapeEncoder};
use crate::geometry::VoxelGrid;
use crate::taxonomy::{parse_text, FeatureSchema, ParseOptions};

pub const INDEX_FORMAT: &str = "rodfind-index";
pub const INDEX_VERSION: u32 = 1;
/// Results returned when no `k` is given.
pub const DEFAULT_K: usize = 8;

/// One gallery shape to embed.
#[derive(Debug, Clone)]
pub struct GalleryItem<'a> {
    pub id: String,
    pub grid: &'a VoxelGrid,
    pub nrrd_path: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub nrrd_path: String,
    pub text: String,
    pub embedding: Vec<f32>,
}

/// Immutable gallery of shape embeddings tied to one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeIndex {
    pub entries: Vec<IndexEntry>,
    /// Fingerprint of the checkpoint whose shape encoder built the index.
    pub fingerprint: String,
    pub resolution: usize,
    pub dim: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    id: String,
    nrrd_path: String,
    text: String,
    /// Byte offset into the embedding block.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    fingerprint: String,
    resolution: usize,
    dim: usize,
    entries: Vec<HeaderEntry>,
}

/// Embeds every item with `shape` (in parallel, output in input order).
pub fn build_index(items: &[GalleryItem<'_>], shape: &ShapeEncoder<f32>, fingerprint: &str) -> Result<ShapeIndex, RetrievalError> {
    if items.is_empty() {
        return Err(RetrievalError::EmptyGallery);
    }
    let mut seen = HashSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(RetrievalError::DuplicateId(item.id.clone()));
        }
        if item.grid.resolution() != shape.arch.resolution {
            return Err(RetrievalError::Resolution { id: item.id.clone(), expected: shape.arch.resolution, actual: item.grid.resolution() });
        }
    }
    let grids: Vec<&VoxelGrid> = items.iter().map(|i| i.grid).collect();
    let embeddings = shape.embed(&grids)?;
    let entries = items
        .iter()
        .zip(embeddings)
        .map(|(item, embedding)| IndexEntry { id: item.id.clone(), nrrd_path: item.nrrd_path.clone(), text: item.text.clone(), embedding })
        .collect();
    Ok(ShapeIndex { entries, fingerprint: fingerprint.to_string(), resolution: shape.arch.resolution, dim: shape.arch.out_dim })
}

impl ShapeIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON header line, newline, then `len × dim` little-endian `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let entry_bytes = self.dim * 4;
        let header = Header {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            fingerprint: self.fingerprint.clone(),
            resolution: self.resolution,
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| HeaderEntry { id: e.id.clone(), nrrd_path: e.nrrd_path.clone(), text: e.text.clone(), offset: i * entry_bytes })
                .collect(),
        };
        let mut out = serde_json::to_vec(&header).expect("index header serializes");
        out.push(b'\n');
        for e in &self.entries {
            for v in &e.embedding {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrievalError> {
        let bad = |m: String| RetrievalError::Format(m);
        let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..split]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
        }
        let block = &bytes[split + 1..];
        let entry_bytes = header.dim * 4;
        if block.len() != header.entries.len() * entry_bytes {
            return Err(bad(format!("embedding block holds {} bytes, expected {}", block.len(), header.entries.len() * entry_bytes)));
        }
        let entries = header
            .entries
            .into_iter()
            .map(|h| {
                let raw = block.get(h.offset..h.offset + entry_bytes).ok_or_else(|| bad(format!("entry {} offset out of range", h.id)))?;
                let embedding = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
                Ok(IndexEntry { id: h.id, nrrd_path: h.nrrd_path, text: h.text, embedding })
            })
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        Ok(Self { entries, fingerprint: header.fingerprint, resolution: header.resolution, dim: header.dim })
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| RetrievalError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let bytes = std::fs::read(path).map_err(|source| RetrievalError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }

    /// The `k` entries nearest to `query` by Euclidean distance, ties by
    /// ascending id; `k` is clamped to the gallery size.
    pub fn nearest(&self, query: &[f32], k: usize) -> Result<Vec<QueryHit>, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyGallery);
        }
        if query.len() != self.dim {
            return Err(RetrievalError::Format(format!("query embedding has {} values, index has {}", query.len(), self.dim)));
        }
        let mut hits: Vec<QueryHit> = self
            .entries
            .iter()
            .map(|e| {
                let d2: f64 = e.embedding.iter().zip(query).map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2)).sum();
                QueryHit { id: e.id.clone(), distance: d2.sqrt(), nrrd_path: e.nrrd_path.clone(), text: e.text.clone() }
            })
            .collect();
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k.min(self.entries.len()));
        Ok(hits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: String,
    pub distance: f64,
    pub nrrd_path: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    /// Requested result count.
    pub k: usize,
    pub hits: Vec<QueryHit>,
    pub warnings: Vec<String>,
}

/// Text queries against an index built from the same checkpoint.
#[derive(Debug)]
pub struct Retriever<'a> {
    index: &'a ShapeIndex,
    checkpoint: &'a Checkpoint,
    schema: FeatureSchema,
}

impl<'a> Retriever<'a> {
    /// Refuses an index built from a different checkpoint.
    pub fn new(index: &'a ShapeIndex, checkpoint: &'a Checkpoint, checkpoint_fingerprint: &str) -> Result<Self, RetrievalError> {
        if index.fingerprint != checkpoint_fingerprint {
            return Err(RetrievalError::FingerprintMismatch { index: index.fingerprint.clone(), checkpoint: checkpoint_fingerprint.to_string() });
        }
        if index.is_empty() {
            return Err(RetrievalError::EmptyGallery);
        }
        Ok(Self { index, checkpoint, schema: FeatureSchema::linking_rod() })
    }

    pub fn with_schema(mut self, schema: FeatureSchema) -> Self {
        self.schema = schema;
        self
    }

    pub fn query(&self, text: &str, k: usize) -> Result<QueryResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let parsed = parse_text(text, &self.schema, ParseOptions { lenient: true })?;
        let mut warnings = parsed.warnings;
        let tokens = tokenize(text, &self.checkpoint.vocabulary);
        let unknown = tokens.tokens[..tokens.true_length].iter().filter(|&&t| t == UNK).count();
        if unknown > 0 {
            warnings.push(format!("{unknown} of {} words are outside the model vocabulary", words(text).count()));
        }
        if k > self.index.len() {
            warnings.push(format!("k = {k} exceeds the gallery size {}; returning {}", self.index.len(), self.index.len()));
        }
        let (embedding, _) = self.checkpoint.text.forward(&tokens)?;
        let hits = self.index.nearest(&embedding, k)?;
        Ok(QueryResult { query: text.to_string(), k, hits, warnings })
    }
}

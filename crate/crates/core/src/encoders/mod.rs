//! Text and voxel encoders into a shared unit-norm embedding space, with
//! hand-written reverse-mode gradients.

mod checkpoint;
mod ops;
mod params;
mod real;
mod shape;
mod text;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::TokenSequence;
use crate::geometry::VoxelGrid;

pub use checkpoint::{fingerprint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use params::{ParamSet, TensorSpec};
pub use real::{gemm, Real};
pub use shape::{ConvLayerPlan, ShapeArch, ShapeCache, ShapeEncoder};
pub use text::{TextArch, TextCache, TextEncoder};

/// Width of the shared embedding space.
pub const EMBED_DIM: usize = 128;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("token id {id} is outside the vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("grid resolution {actual} does not match the encoder's {expected}")]
    Resolution { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("architecture: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Seeded initialization of both standard encoders. Text tensors are drawn
/// first, then shape tensors, from one generator.
pub fn init_params(vocab_size: usize, seed: u64) -> (TextEncoder<f32>, ShapeEncoder<f32>) {
    init_with(TextArch::standard(vocab_size), ShapeArch::standard(), seed).expect("standard layout is valid")
}

/// Seeded initialization of arbitrary layouts.
pub fn init_with<T: Real>(text: TextArch, shape: ShapeArch, seed: u64) -> Result<(TextEncoder<T>, ShapeEncoder<T>), EncoderError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tp = ParamSet::zeros(text.tensor_specs());
    tp.init_uniform(&mut rng);
    let mut sp = ParamSet::zeros(shape.tensor_specs()?);
    sp.init_uniform(&mut rng);
    Ok((TextEncoder::new(text, tp)?, ShapeEncoder::new(shape, sp)?))
}

impl<T: Real> TextEncoder<T> {
    /// Embeds a batch in parallel; output order follows input order.
    pub fn embed(&self, seqs: &[TokenSequence]) -> Result<Vec<Vec<T>>, EncoderError> {
        seqs.par_iter().map(|s| self.forward(s).map(|(e, _)| e)).collect()
    }
}

impl<T: Real> ShapeEncoder<T> {
    /// Embeds a batch in parallel; output order follows input order.
    pub fn embed(&self, grids: &[&VoxelGrid]) -> Result<Vec<Vec<T>>, EncoderError> {
        grids.par_iter().map(|g| self.forward(g).map(|(e, _)| e)).collect()
    }
}

//! Bidirectional triplet training of the two encoders and recall
//! evaluation.

mod fit;
mod loss;
mod optim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{tokenize, DatasetError, DatasetManifest, ManifestRow, Sample, TokenSequence, Vocabulary};
use crate::encoders::{init_with, EncoderError, ShapeArch, TextArch};
use crate::geometry::VoxelGrid;

pub use fit::{
    batch_gradient, batch_loss, epoch_batches, evaluate_recall, evaluate_recalls, fit_from, log_to_csv, own_shape_ranks,
    recall_from_embeddings, BatchGrad, EpochLog, FitOutcome,
};
pub use loss::{
    classify_triplet, combined_loss, combined_loss_grad, mine_semihard, pairwise_distances, triplet_loss, Direction,
    DistanceMatrix, LossBreakdown, LossGrad, Triplet, TripletClass, TripletSet,
};
pub use optim::{Optimizer, OptimizerKind};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("a batch of {0} has no negative for any anchor")]
    NoNegatives(usize),
    #[error("non-finite loss in epoch {epoch}, batch [{}]", .batch.join(", "))]
    NonFiniteLoss { epoch: usize, batch: Vec<String> },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub margin: f64,
    /// Weight of the shape-to-text term.
    pub mu: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Total 3-D convolution layers of the shape encoder.
    pub conv_layers: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            learning_rate: 1e-5,
            epochs: 100,
            margin: 0.2,
            mu: 1.0,
            seed: 7,
            optimizer: OptimizerKind::default(),
            conv_layers: 7,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be finite and nonnegative, got {}", self.learning_rate));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad(format!("mu must be nonnegative, got {}", self.mu));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return bad("Adam needs 0 ≤ β < 1 and ε > 0".into());
            }
        }
        ShapeArch::with_layers(self.conv_layers).plan()?;
        Ok(())
    }
}

/// One paired training item.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub tokens: TokenSequence,
    pub grid: VoxelGrid,
}

pub fn examples_from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>, vocab: &Vocabulary) -> Vec<Example> {
    samples
        .into_iter()
        .map(|s| Example { id: s.id.clone(), tokens: tokenize(&s.text, vocab), grid: s.grid.clone() })
        .collect()
}

/// Loads the grids of `rows` from the manifest's directory.
pub fn examples_from_manifest<'a>(
    manifest: &DatasetManifest,
    rows: impl IntoIterator<Item = &'a ManifestRow>,
    vocab: &Vocabulary,
) -> Result<Vec<Example>, TrainingError> {
    rows.into_iter()
        .map(|r| Ok(Example { id: r.id.clone(), tokens: tokenize(&r.text, vocab), grid: manifest.load_grid(r)? }))
        .collect()
}

/// Trains standard-width encoders initialized from `config.seed`.
pub fn fit(
    train: &[Example],
    val: &[Example],
    vocab_size: usize,
    config: &TrainerConfig,
    on_epoch: impl FnMut(&EpochLog) -> std::ops::ControlFlow<()>,
) -> Result<FitOutcome<f32>, TrainingError> {
    config.validate()?;
    let (text, shape) = init_with(TextArch::standard(vocab_size), ShapeArch::with_layers(config.conv_layers), config.seed)?;
    fit_from(text, shape, train, val, config, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(TrainerConfig::default().validate().is_ok());
        for bad in [
            TrainerConfig { batch_size: 1, ..Default::default() },
            TrainerConfig { margin: 0.0, ..Default::default() },
            TrainerConfig { learning_rate: f64::NAN, ..Default::default() },
            TrainerConfig { conv_layers: 2, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn batches_cover_every_item_once() {
        let b = epoch_batches(9, 4, 1, 3);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert_eq!(b, epoch_batches(9, 4, 1, 3));
        assert_ne!(b, epoch_batches(9, 4, 1, 4));
    }
}

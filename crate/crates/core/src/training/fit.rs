//! Batch gradients, the epoch loop and retrieval recall.

use std::ops::ControlFlow;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{combined_loss_grad, LossBreakdown, TripletSet};
use super::optim::Optimizer;
use super::{Example, TrainerConfig, TrainingError};
use crate::encoders::{ParamSet, Real, ShapeEncoder, TextEncoder};

/// Loss and parameter gradients of one batch.
#[derive(Debug, Clone)]
pub struct BatchGrad<T> {
    pub loss: LossBreakdown<T>,
    pub triplets: TripletSet,
    pub text: ParamSet<T>,
    pub shape: ParamSet<T>,
}

fn embed_batch<T: Real>(
    text: &TextEncoder<T>,
    shape: &ShapeEncoder<T>,
    batch: &[&Example],
) -> Result<Vec<((Vec<T>, crate::encoders::TextCache<T>), (Vec<T>, crate::encoders::ShapeCache<T>))>, TrainingError> {
    Ok(batch
        .par_iter()
        .map(|ex| Ok((text.forward(&ex.tokens)?, shape.forward(&ex.grid)?)))
        .collect::<Result<Vec<_>, crate::encoders::EncoderError>>()?)
}

/// Combined loss of a batch without gradients.
pub fn batch_loss<T: Real>(
    text: &TextEncoder<T>,
    shape: &ShapeEncoder<T>,
    batch: &[&Example],
    margin: f64,
    mu: f64,
) -> Result<LossBreakdown<T>, TrainingError> {
    let texts = text.embed(&batch.iter().map(|e| e.tokens.clone()).collect::<Vec<_>>())?;
    let shapes = shape.embed(&batch.iter().map(|e| &e.grid).collect::<Vec<_>>())?;
    let ids: Vec<&str> = batch.iter().map(|e| e.id.as_str()).collect();
    Ok(combined_loss_grad(&texts, &shapes, &ids, T::of(margin), T::of(mu))?.loss)
}

/// Exact gradient of the combined loss with respect to both encoders.
/// Per-sample contributions are summed in batch order.
pub fn batch_gradient<T: Real>(
    text: &TextEncoder<T>,
    shape: &ShapeEncoder<T>,
    batch: &[&Example],
    margin: f64,
    mu: f64,
) -> Result<BatchGrad<T>, TrainingError> {
    let forward = embed_batch(text, shape, batch)?;
    let texts: Vec<Vec<T>> = forward.iter().map(|f| f.0 .0.clone()).collect();
    let shapes: Vec<Vec<T>> = forward.iter().map(|f| f.1 .0.clone()).collect();
    let ids: Vec<&str> = batch.iter().map(|e| e.id.as_str()).collect();
    let lg = combined_loss_grad(&texts, &shapes, &ids, T::of(margin), T::of(mu))?;
    if !lg.loss.total.is_finite() {
        return Err(TrainingError::NonFiniteLoss { epoch: 0, batch: ids.iter().map(|s| s.to_string()).collect() });
    }
    let is_zero = |g: &[T]| g.iter().all(|v| *v == T::zero());
    let parts: Vec<(Option<ParamSet<T>>, Option<ParamSet<T>>)> = forward
        .par_iter()
        .enumerate()
        .map(|(i, ((_, tc), (_, sc)))| {
            let tg = (!is_zero(&lg.d_text[i])).then(|| {
                let mut g = text.params.zeros_like();
                text.backward(tc, &lg.d_text[i], &mut g);
                g
            });
            let sg = (!is_zero(&lg.d_shape[i])).then(|| {
                let mut g = shape.params.zeros_like();
                shape.backward(sc, &lg.d_shape[i], &mut g);
                g
            });
            (tg, sg)
        })
        .collect();
    let mut gt = text.params.zeros_like();
    let mut gs = shape.params.zeros_like();
    for (tg, sg) in &parts {
        if let Some(tg) = tg {
            gt.add_assign(tg);
        }
        if let Some(sg) = sg {
            gs.add_assign(sg);
        }
    }
    Ok(BatchGrad { loss: lg.loss, triplets: lg.triplets, text: gt, shape: gs })
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// `0` evaluates the initial parameters without updating them.
    pub epoch: usize,
    /// Mean batch loss over the epoch, measured before each update.
    pub train_loss: f64,
    pub val_recall1: Option<f64>,
    pub wall_seconds: f64,
}

/// `epoch,train_loss,val_recall1,wall_seconds`.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_recall1,wall_seconds\n");
    for row in log {
        let recall = row.val_recall1.map(|r| format!("{r:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{:.8},{},{:.3}\n", row.epoch, row.train_loss, recall, row.wall_seconds));
    }
    out
}

/// Seeded batch partition of `n` items for `epoch`; a trailing batch of one
/// joins the previous batch so every batch can mine a negative.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mix = seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().expect("nonempty");
        batches.last_mut().expect("nonempty").extend(last);
    }
    batches
}

/// Trained encoders and their log.
#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub text: TextEncoder<T>,
    pub shape: ShapeEncoder<T>,
    pub log: Vec<EpochLog>,
}

/// Runs `config.epochs` epochs of shuffled mini-batch updates starting from
/// the given encoders. `on_epoch` sees each log row (including epoch 0) and
/// may stop training early.
pub fn fit_from<T: Real>(
    mut text: TextEncoder<T>,
    mut shape: ShapeEncoder<T>,
    train: &[Example],
    val: &[Example],
    config: &TrainerConfig,
    mut on_epoch: impl FnMut(&EpochLog) -> ControlFlow<()>,
) -> Result<FitOutcome<T>, TrainingError> {
    config.validate()?;
    if train.len() < 2 {
        return Err(TrainingError::NoNegatives(train.len()));
    }
    let start = Instant::now();
    let mut opt_text = Optimizer::new(config.optimizer, config.learning_rate, text.params.len());
    let mut opt_shape = Optimizer::new(config.optimizer, config.learning_rate, shape.params.len());
    let mut log = Vec::with_capacity(config.epochs + 1);
    let recall = |text: &TextEncoder<T>, shape: &ShapeEncoder<T>| -> Result<Option<f64>, TrainingError> {
        if val.is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate_recall(text, shape, val, 1)?))
        }
    };

    for epoch in 0..=config.epochs {
        let mut losses = Vec::new();
        for batch in epoch_batches(train.len(), config.batch_size, config.seed, epoch) {
            let items: Vec<&Example> = batch.iter().map(|&i| &train[i]).collect();
            let non_finite = || TrainingError::NonFiniteLoss { epoch, batch: items.iter().map(|e| e.id.clone()).collect() };
            if epoch == 0 {
                let loss = batch_loss(&text, &shape, &items, config.margin, config.mu)?;
                if !loss.total.is_finite() {
                    return Err(non_finite());
                }
                losses.push(loss.total.to_f64().expect("finite"));
                continue;
            }
            let grad = match batch_gradient(&text, &shape, &items, config.margin, config.mu) {
                Err(TrainingError::NonFiniteLoss { .. }) => return Err(non_finite()),
                other => other?,
            };
            losses.push(grad.loss.total.to_f64().expect("finite"));
            opt_text.update(text.params.data_mut(), grad.text.data());
            opt_shape.update(shape.params.data_mut(), grad.shape.data());
        }
        if !(text.params.is_finite() && shape.params.is_finite()) {
            return Err(TrainingError::NonFiniteLoss { epoch, batch: vec!["<parameters>".into()] });
        }
        let row = EpochLog {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len() as f64,
            val_recall1: recall(&text, &shape)?,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let flow = on_epoch(&row);
        log.push(row);
        if flow.is_break() {
            break;
        }
    }
    Ok(FitOutcome { text, shape, log })
}

/// For every item's text, ranks all item shapes by distance (ties by
/// ascending id) and returns the fraction whose own shape is in the top `k`,
/// for each requested `k`.
pub fn evaluate_recalls<T: Real>(
    text: &TextEncoder<T>,
    shape: &ShapeEncoder<T>,
    items: &[Example],
    ks: &[usize],
) -> Result<Vec<f64>, TrainingError> {
    if items.is_empty() {
        return Err(TrainingError::EmptyEvaluation);
    }
    if ks.contains(&0) {
        return Err(TrainingError::Config("k must be at least 1".into()));
    }
    let texts = text.embed(&items.iter().map(|e| e.tokens.clone()).collect::<Vec<_>>())?;
    let shapes = shape.embed(&items.iter().map(|e| &e.grid).collect::<Vec<_>>())?;
    let ids: Vec<&str> = items.iter().map(|e| e.id.as_str()).collect();
    Ok(recall_from_embeddings(&texts, &shapes, &ids, ks))
}

pub fn evaluate_recall<T: Real>(text: &TextEncoder<T>, shape: &ShapeEncoder<T>, items: &[Example], k: usize) -> Result<f64, TrainingError> {
    Ok(evaluate_recalls(text, shape, items, &[k])?[0])
}

/// Zero-based rank of each text's own shape among all shapes.
pub fn own_shape_ranks<T: Real>(texts: &[Vec<T>], shapes: &[Vec<T>], ids: &[&str]) -> Vec<usize> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let dist = |s: &Vec<T>| t.iter().zip(s).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
            let own = dist(&shapes[i]);
            shapes
                .iter()
                .enumerate()
                .filter(|&(j, s)| {
                    let d = dist(s);
                    j != i && (d < own || (d == own && ids[j] < ids[i]))
                })
                .count()
        })
        .collect()
}

pub fn recall_from_embeddings<T: Real>(texts: &[Vec<T>], shapes: &[Vec<T>], ids: &[&str], ks: &[usize]) -> Vec<f64> {
    let ranks = own_shape_ranks(texts, shapes, ids);
    ks.iter().map(|&k| ranks.iter().filter(|&&r| r < k).count() as f64 / ranks.len() as f64).collect()
}

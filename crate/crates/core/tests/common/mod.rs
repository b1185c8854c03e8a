//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod tables;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::ControlFlow;

use rodfind_core::dataset::{build_vocabulary, concrete_sizes, default_bases, size_combinations, tokenize, TokenSequence, MAX_TOKENS, PAD};
use rodfind_core::encoders::{init_with, Checkpoint, ParamSet, ShapeArch, ShapeEncoder, TextArch, TextEncoder};
use rodfind_core::geometry::{build_solid, voxelize_solid, VoxelGrid};
use rodfind_core::taxonomy::{render_text, FeatureSchema};
use rodfind_core::training::{
    batch_gradient, batch_loss, combined_loss, fit_from, DistanceMatrix, Example, TrainerConfig, TripletClass,
};

/// Narrow versions of both encoders with the full layer structure and a
/// full 16³ input.
pub fn tiny_archs(vocab_size: usize) -> (TextArch, ShapeArch) {
    let text = TextArch { vocab_size, embed_dim: 4, conv_channels: vec![3, 3, 3, 4], hidden: 4, fc_hidden: 4, out_dim: 3 };
    let shape = ShapeArch {
        resolution: 16,
        conv_layers: 7,
        stem_channels: 2,
        head_channels: vec![3, 3, 4],
        head_pads: vec![1, 1, 2],
        pool: 2,
        out_dim: 3,
    };
    (text, shape)
}

/// Gain on the default weights so activations keep their scale through the
/// narrow ReLU stacks instead of collapsing onto the biases.
const WEIGHT_GAIN: f64 = 2.45;
const BIAS_SPREAD: f64 = 0.05;

/// Tiny 64-bit encoders whose biases are nonzero so no ReLU input sits
/// exactly on its kink.
pub fn tiny_encoders(vocab_size: usize, seed: u64) -> (TextEncoder<f64>, ShapeEncoder<f64>) {
    let (text, shape, _) = scaled_encoders(vocab_size, seed);
    (text, shape)
}

/// [`tiny_encoders`] plus the generator state after drawing the biases.
fn scaled_encoders(vocab_size: usize, seed: u64) -> (TextEncoder<f64>, ShapeEncoder<f64>, ChaCha8Rng) {
    let (ta, sa) = tiny_archs(vocab_size);
    let (mut text, mut shape) = init_with::<f64>(ta, sa, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5);
    for set in [&mut text.params, &mut shape.params] {
        for i in 0..set.specs().len() {
            let bias = set.specs()[i].bias;
            for v in set.tensor_mut(i) {
                *v = if bias { rng.random_range(-BIAS_SPREAD..BIAS_SPREAD) } else { *v * WEIGHT_GAIN };
            }
        }
    }
    (text, shape, rng)
}

/// Two distinct rods, voxelized at 16³, with their canonical texts.
pub fn two_rods() -> Vec<(String, String, VoxelGrid)> {
    let schema = FeatureSchema::linking_rod();
    let bases = default_bases();
    [(0usize, 5usize), (9, 40)]
        .iter()
        .enumerate()
        .map(|(n, &(b, c))| {
            let spec = &size_combinations(&bases[b], &schema)[c];
            let grid = voxelize_solid(&build_solid(spec, &concrete_sizes(spec)).unwrap(), 16).unwrap();
            (format!("T{n}"), render_text(spec, &schema).unwrap(), grid)
        })
        .collect()
}

/// Two rod samples with random 8-token texts over an 8-word vocabulary and
/// tiny encoders.
pub fn tiny_instance(seed: u64) -> (TextEncoder<f64>, ShapeEncoder<f64>, Vec<Example>) {
    let (text, shape, mut rng) = scaled_encoders(8, seed);
    let examples = two_rods()
        .into_iter()
        .map(|(id, _, grid)| {
            let mut tokens: Vec<u32> = (0..8).map(|_| rng.random_range(0..8)).collect();
            tokens.resize(MAX_TOKENS, PAD);
            Example { id, tokens: TokenSequence { tokens, true_length: 8 }, grid }
        })
        .collect();
    (text, shape, examples)
}

/// A checkpoint of tiny encoders trained until the two rods of
/// [`two_rods`] retrieve each other's texts, plus those rods.
pub fn memorized_toy() -> (Checkpoint, Vec<(String, String, VoxelGrid)>) {
    let rods = two_rods();
    let texts: Vec<&str> = rods.iter().map(|r| r.1.as_str()).collect();
    let vocabulary = build_vocabulary(&texts, 1);
    let (text, shape) = tiny_encoders(vocabulary.len(), 8);
    let examples: Vec<Example> =
        rods.iter().map(|(id, t, grid)| Example { id: id.clone(), tokens: tokenize(t, &vocabulary), grid: grid.clone() }).collect();
    let config = TrainerConfig { batch_size: 2, learning_rate: 1e-2, epochs: 200, ..Default::default() };
    let out = fit_from(text, shape, &examples, &examples, &config, |_| ControlFlow::Continue(())).unwrap();
    (Checkpoint { text: out.text.cast(), shape: out.shape.cast(), vocabulary, seed: 8 }, rods)
}

#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Relative error with a floor so coordinates whose true gradient is zero
/// compare on an absolute scale.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

/// Compares every analytic coordinate with a central difference of step `h`.
/// While one encoder is perturbed the other's embeddings are reused.
pub fn grad_check(
    text: &TextEncoder<f64>,
    shape: &ShapeEncoder<f64>,
    batch: &[Example],
    margin: f64,
    mu: f64,
    h: f64,
) -> GradCheck {
    let refs: Vec<&Example> = batch.iter().collect();
    let analytic = batch_gradient(text, shape, &refs, margin, mu).unwrap();
    let ids: Vec<&str> = batch.iter().map(|e| e.id.as_str()).collect();
    let seqs: Vec<_> = batch.iter().map(|e| e.tokens.clone()).collect();
    let grids: Vec<_> = batch.iter().map(|e| &e.grid).collect();
    let text_embs = text.embed(&seqs).unwrap();
    let shape_embs = shape.embed(&grids).unwrap();
    let loss = |t: &[Vec<f64>], s: &[Vec<f64>]| combined_loss(t, s, &ids, margin, mu).unwrap().total;
    assert!((loss(&text_embs, &shape_embs) - batch_loss(text, shape, &refs, margin, mu).unwrap().total).abs() < 1e-12);

    let mut report = GradCheck { checked: 0, max_rel: 0.0, worst: String::new() };
    let mut record = |name: &str, a: f64, numeric: f64| {
        let rel = rel_error(a, numeric);
        report.checked += 1;
        if rel > report.max_rel {
            report.max_rel = rel;
            report.worst = format!("{name} analytic {a:e} numeric {numeric:e}");
        }
    };
    let mut t = text.clone();
    for i in 0..t.params.len() {
        let orig = t.params.data()[i];
        let mut at = |x: f64| {
            t.params.data_mut()[i] = x;
            loss(&t.embed(&seqs).unwrap(), &shape_embs)
        };
        let numeric = (at(orig + h) - at(orig - h)) / (2.0 * h);
        at(orig);
        record(&coordinate_name(&t.params, i), analytic.text.data()[i], numeric);
    }
    let mut s = shape.clone();
    for i in 0..s.params.len() {
        let orig = s.params.data()[i];
        let mut at = |x: f64| {
            s.params.data_mut()[i] = x;
            loss(&text_embs, &s.embed(&grids).unwrap())
        };
        let numeric = (at(orig + h) - at(orig - h)) / (2.0 * h);
        at(orig);
        record(&coordinate_name(&s.params, i), analytic.shape.data()[i], numeric);
    }
    report
}

fn coordinate_name(set: &ParamSet<f64>, i: usize) -> String {
    let k = (0..set.specs().len()).rev().find(|&k| set.offset(k) <= i).unwrap();
    format!("{}[{}]", set.specs()[k].name, i - set.offset(k))
}

/// Random `n × n` distances in [0, 2); half the matrices are rounded to a
/// 0.2 grid so ties and every triplet class are common.
pub fn random_distance_matrix(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix<f64> {
    let coarse = rng.random_bool(0.5);
    let data = (0..n * n)
        .map(|_| {
            let v: f64 = rng.random_range(0.0..2.0);
            if coarse {
                (v * 5.0).round() / 5.0
            } else {
                v
            }
        })
        .collect();
    DistanceMatrix { n, data }
}

/// Exhaustive oracle: for each anchor and direction enumerate every
/// (anchor, positive, negative) with distinct ids, classify with the plain
/// inequalities and pick the semi-hard one with the smallest negative
/// distance, else the smallest negative distance overall.
pub fn brute_force_mining(d: &DistanceMatrix<f64>, ids: &[String], margin: f64) -> Vec<(usize, usize, usize, bool, TripletClass)> {
    let n = d.n;
    let mut out = Vec::new();
    for t2s in [true, false] {
        let dist = |a: usize, o: usize| if t2s { d.get(a, o) } else { d.get(o, a) };
        for a in 0..n {
            let mut all: Vec<(f64, usize, TripletClass)> = Vec::new();
            for p in 0..n {
                if p != a {
                    continue;
                }
                for neg in 0..n {
                    if ids[neg] == ids[a] {
                        continue;
                    }
                    let (dap, dan) = (dist(a, p), dist(a, neg));
                    let class = if dan > dap && dan < dap + margin {
                        TripletClass::SemiHard
                    } else if dan > dap {
                        TripletClass::Easy
                    } else {
                        TripletClass::Hard
                    };
                    all.push((dan, neg, class));
                }
            }
            let pick = |pool: Vec<&(f64, usize, TripletClass)>| {
                pool.into_iter().min_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1))).copied()
            };
            let semi = pick(all.iter().filter(|c| c.2 == TripletClass::SemiHard).collect());
            if let Some((_, neg, class)) = semi.or_else(|| pick(all.iter().collect())) {
                out.push((a, a, neg, t2s, class));
            }
        }
    }
    out
}

mod common;

use std::ops::ControlFlow;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rodfind_core::training::{
    batch_gradient, classify_triplet, combined_loss, combined_loss_grad, fit_from, mine_semihard, recall_from_embeddings, Direction,
    Example, OptimizerKind, TrainerConfig, TripletClass,
};

/// Central-difference step for the 64-bit check. No ReLU or max-pool switch
/// of the fixture lies within one step, and rounding stays far below the
/// tolerance at this size.
const FD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;

#[test]
fn combined_loss_gradient_matches_central_differences() {
    let (text, shape, batch) = tiny_instance(3);
    let report = grad_check(&text, &shape, &batch, 3.0, 1.0, FD_STEP);
    assert_eq!(report.checked, text.params.len() + shape.params.len());
    assert!(report.max_rel <= GRAD_TOL, "{report:?}");
}

#[test]
fn all_easy_batch_has_exactly_zero_gradient() {
    let margin = 1e-3;
    let (text, shape, batch) = (0..500)
        .map(tiny_instance)
        .find(|(t, s, b)| {
            let refs: Vec<&Example> = b.iter().collect();
            let g = batch_gradient(t, s, &refs, margin, 1.0).unwrap();
            g.triplets.triplets.iter().all(|tr| tr.class == TripletClass::Easy)
        })
        .expect("some seed yields an all-easy batch");
    let refs: Vec<&Example> = batch.iter().collect();
    let g = batch_gradient(&text, &shape, &refs, margin, 1.0).unwrap();
    assert_eq!(g.loss.total, 0.0);
    assert!(g.text.data().iter().chain(g.shape.data()).all(|&v| v == 0.0));
}

#[test]
fn gradient_is_affine_in_mu() {
    let (text, shape, batch) = tiny_instance(3);
    let refs: Vec<&Example> = batch.iter().collect();
    let at = |mu: f64| batch_gradient(&text, &shape, &refs, 3.0, mu).unwrap();
    let (g0, g1, g25) = (at(0.0), at(1.0), at(2.5));
    let pairs = [(g0.text.data(), g1.text.data(), g25.text.data()), (g0.shape.data(), g1.shape.data(), g25.shape.data())];
    for (a, b, c) in pairs {
        for i in 0..a.len() {
            let expect = a[i] + 2.5 * (b[i] - a[i]);
            assert!((c[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "coordinate {i}");
        }
    }
    assert!((g25.loss.total - (g0.loss.t2s + 2.5 * g1.loss.s2t)).abs() < 1e-12);
}

#[test]
fn mining_equals_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut fallbacks, mut semi) = (0, 0);
    for case in 0..1000 {
        let n = rng.random_range(2..=8);
        let d = random_distance_matrix(&mut rng, n);
        let ids: Vec<String> = (0..n).map(|i| if rng.random_bool(0.15) { "dup".to_string() } else { format!("s{i}") }).collect();
        let margin = [0.05, 0.2, 0.5, 1.0][case % 4];
        let expect = brute_force_mining(&d, &ids, margin);
        match mine_semihard(&d, &ids, margin) {
            Ok(set) => {
                let got: Vec<_> = set
                    .triplets
                    .iter()
                    .map(|t| (t.anchor, t.positive, t.negative, t.direction == Direction::TextToShape, t.class))
                    .collect();
                assert_eq!(got, expect, "case {case}: {d:?} {ids:?}");
                fallbacks += got.iter().filter(|t| t.4 != TripletClass::SemiHard).count();
                semi += got.iter().filter(|t| t.4 == TripletClass::SemiHard).count();
            }
            Err(_) => assert!(expect.is_empty(), "case {case}"),
        }
    }
    assert!(fallbacks > 500 && semi > 500, "fallback {fallbacks}, semi-hard {semi}");
}

#[test]
fn classification_matches_closed_form_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100_000 {
        let grid = rng.random_bool(0.3);
        let mut draw = |hi: f64| {
            let v: f64 = rng.random_range(0.0..hi);
            if grid {
                (v * 8.0).round() / 8.0
            } else {
                v
            }
        };
        let (d_ap, d_an, margin) = (draw(2.0), draw(2.0), draw(1.0).max(0.125));
        let expect = if d_an <= d_ap {
            TripletClass::Hard
        } else if d_an >= d_ap + margin {
            TripletClass::Easy
        } else {
            TripletClass::SemiHard
        };
        assert_eq!(classify_triplet(d_ap, d_an, margin), expect, "{d_ap} {d_an} {margin}");
    }
}

#[test]
fn zero_learning_rate_keeps_parameters_bitwise() {
    let (text, shape, batch) = tiny_instance(5);
    let config = TrainerConfig { batch_size: 2, learning_rate: 0.0, epochs: 3, conv_layers: 7, ..Default::default() };
    let out = fit_from(text.clone(), shape.clone(), &batch, &batch, &config, |_| ControlFlow::Continue(())).unwrap();
    assert_eq!(out.text.params, text.params);
    assert_eq!(out.shape.params, shape.params);
    assert_eq!(out.log.len(), 4);
    assert_eq!(out.log[0].epoch, 0);
    assert!(out.log.windows(2).all(|w| w[0].train_loss == w[1].train_loss));
}

#[test]
fn two_samples_are_memorized() {
    let (text, shape, batch) = tiny_instance(8);
    let config = TrainerConfig {
        batch_size: 2,
        learning_rate: 1e-2,
        epochs: 200,
        margin: 0.2,
        optimizer: OptimizerKind::default(),
        ..Default::default()
    };
    let out = fit_from(text, shape, &batch, &batch, &config, |_| ControlFlow::Continue(())).unwrap();
    let (first, last) = (&out.log[0], out.log.last().unwrap());
    assert!(first.train_loss > 0.0);
    assert!(last.train_loss < 0.1 * first.train_loss, "{} -> {}", first.train_loss, last.train_loss);
    assert_eq!(last.val_recall1, Some(1.0));
}

#[test]
fn early_stop_from_callback() {
    let (text, shape, batch) = tiny_instance(2);
    let config = TrainerConfig { batch_size: 2, learning_rate: 1e-3, epochs: 50, ..Default::default() };
    let out = fit_from(text, shape, &batch, &[], &config, |row| if row.epoch == 2 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
        .unwrap();
    assert_eq!(out.log.len(), 3);
    assert!(out.log.iter().all(|r| r.val_recall1.is_none()));
}

fn unit_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

#[test]
fn recall_of_random_embeddings_is_k_over_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (n, trials) = (10, 4000);
    let ids: Vec<String> = (0..n).map(|i| format!("x{i:02}")).collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let mut sums = [0.0; 3];
    for _ in 0..trials {
        let (t, s) = (unit_vectors(&mut rng, n, 4), unit_vectors(&mut rng, n, 4));
        for (acc, r) in sums.iter_mut().zip(recall_from_embeddings(&t, &s, &id_refs, &[1, 3, 8])) {
            *acc += r;
        }
    }
    for (acc, k) in sums.iter().zip([1.0, 3.0, 8.0]) {
        let p: f64 = k / n as f64;
        let sigma = (p * (1.0 - p) / (n * trials) as f64).sqrt();
        assert!((acc / trials as f64 - p).abs() < 5.0 * sigma + 1e-3, "k {k}: {}", acc / trials as f64);
    }
}

#[test]
fn recall_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e = unit_vectors(&mut rng, 6, 3);
    let ids = ["a", "b", "c", "d", "e", "f"];
    assert_eq!(recall_from_embeddings(&e, &e, &ids, &[1, 6]), vec![1.0, 1.0]);
    let same = vec![e[0].clone(); 6];
    // Every distance ties, so only the smallest id ranks first.
    assert_eq!(recall_from_embeddings(&e, &same, &ids, &[1, 3, 6]), vec![1.0 / 6.0, 0.5, 1.0]);
}

fn batch_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, u64)> {
    (2usize..7).prop_flat_map(|n| {
        let v = prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), n);
        (v.clone(), v, any::<u64>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_is_invariant_under_batch_permutation((texts, shapes, seed) in batch_strategy()) {
        let ids: Vec<String> = (0..texts.len()).map(|i| format!("p{i}")).collect();
        let base = combined_loss(&texts, &shapes, &ids, 0.3, 0.7).unwrap();
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pick = |v: &[Vec<f64>]| order.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let ids_p: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
        let perm = combined_loss(&pick(&texts), &pick(&shapes), &ids_p, 0.3, 0.7).unwrap();
        prop_assert!((base.t2s - perm.t2s).abs() < 1e-12 && (base.s2t - perm.s2t).abs() < 1e-12);
    }

    #[test]
    fn swapping_modalities_swaps_the_terms((texts, shapes, _seed) in batch_strategy()) {
        let ids: Vec<String> = (0..texts.len()).map(|i| format!("p{i}")).collect();
        let a = combined_loss(&texts, &shapes, &ids, 0.4, 1.0).unwrap();
        let b = combined_loss(&shapes, &texts, &ids, 0.4, 1.0).unwrap();
        prop_assert_eq!(a.t2s, b.s2t);
        prop_assert_eq!(a.s2t, b.t2s);
    }

    #[test]
    fn embedding_gradients_match_finite_differences((texts, shapes, _seed) in batch_strategy()) {
        let ids: Vec<String> = (0..texts.len()).map(|i| format!("p{i}")).collect();
        let g = combined_loss_grad(&texts, &shapes, &ids, 0.5, 0.8).unwrap();
        let h = 1e-6;
        for (i, k) in [(0usize, 0usize), (1, 2)] {
            let mut tp = texts.clone();
            let mut tm = texts.clone();
            tp[i][k] += h;
            tm[i][k] -= h;
            let same_triplets = |t: &[Vec<f64>]| combined_loss_grad(t, &shapes, &ids, 0.5, 0.8).unwrap().triplets == g.triplets;
            // Skip points where the perturbation flips a mining decision or crosses a hinge.
            if !(same_triplets(&tp) && same_triplets(&tm)) {
                continue;
            }
            let f = |t: &[Vec<f64>]| combined_loss(t, &shapes, &ids, 0.5, 0.8).unwrap().total;
            let numeric = (f(&tp) - f(&tm)) / (2.0 * h);
            prop_assert!((numeric - g.d_text[i][k]).abs() < 1e-5 * (1.0 + numeric.abs()), "{} vs {}", numeric, g.d_text[i][k]);
        }
    }
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rodfind_bench::{rod_grid, rod_solid};
use rodfind_core::dataset::{build_vocabulary, default_bases, read_nrrd, size_combinations, tokenize, write_nrrd};
use rodfind_core::doe::{anova, range_analysis, DesignFile};
use rodfind_core::encoders::init_params;
use rodfind_core::geometry::voxelize_solid;
use rodfind_core::retrieval::{IndexEntry, ShapeIndex};
use rodfind_core::taxonomy::{parse_text, render_text, ParseOptions};
use rodfind_core::training::{batch_gradient, mine_semihard, pairwise_distances, Example};
use rodfind_core::{FeatureSchema, LinkingRodSpec};

fn geometry(c: &mut Criterion) {
    let solid = rod_solid(0);
    c.bench_function("voxelize_solid_16", |b| b.iter(|| voxelize_solid(black_box(&solid), 16).unwrap()));
    let grid = rod_grid(0, 16);
    let bytes = write_nrrd(&grid);
    c.bench_function("nrrd_round_trip_16", |b| b.iter(|| read_nrrd(&write_nrrd(black_box(&grid))).unwrap()));
    c.bench_function("nrrd_read_16", |b| b.iter(|| read_nrrd(black_box(&bytes)).unwrap()));
}

fn text(c: &mut Criterion) {
    let schema = FeatureSchema::linking_rod();
    let spec = rod_spec(2);
    let description = render_text(&spec, &schema).unwrap();
    c.bench_function("render_text", |b| b.iter(|| render_text(black_box(&spec), &schema).unwrap()));
    c.bench_function("parse_text", |b| b.iter(|| parse_text(black_box(&description), &schema, ParseOptions::default()).unwrap()));
}

fn encoders(c: &mut Criterion) {
    let grid = rod_grid(1, 16);
    let description = render_text(&rod_spec(1), &FeatureSchema::linking_rod()).unwrap();
    let vocab = build_vocabulary(&[description.as_str()], 1);
    let tokens = tokenize(&description, &vocab);
    let (text, shape) = init_params(vocab.len(), 7);
    c.bench_function("shape_forward_7_layers", |b| b.iter(|| shape.forward(black_box(&grid)).unwrap()));
    c.bench_function("text_forward", |b| b.iter(|| text.forward(black_box(&tokens)).unwrap()));

    let examples: Vec<Example> = (0..4)
        .map(|i| Example { id: format!("S{i}"), tokens: tokens.clone(), grid: rod_grid(i, 16) })
        .collect();
    let batch: Vec<&Example> = examples.iter().collect();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("batch_gradient_4", |b| b.iter(|| batch_gradient(&text, &shape, black_box(&batch), 0.2, 1.0).unwrap()));
    group.finish();
}

fn rod_spec(base: usize) -> LinkingRodSpec {
    size_combinations(&default_bases()[base], &FeatureSchema::linking_rod()).remove(0)
}

/// Deterministic xorshift vectors with entries in [-0.5, 0.5).
fn vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 40) as f32 / (1u64 << 24) as f32 - 0.5
                })
                .collect()
        })
        .collect()
}

fn retrieval(c: &mut Criterion) {
    let entries = vectors(1000, 128, 3)
        .into_iter()
        .enumerate()
        .map(|(i, embedding)| IndexEntry { id: format!("S{i:04}"), nrrd_path: String::new(), text: String::new(), embedding })
        .collect();
    let index = ShapeIndex { entries, fingerprint: "bench".into(), resolution: 16, dim: 128 };
    let query = vectors(1, 128, 9).remove(0);
    c.bench_function("query_scan_1000_k8", |b| b.iter(|| index.nearest(black_box(&query), 8).unwrap()));
    let bytes = index.to_bytes();
    c.bench_function("index_decode_1000", |b| b.iter(|| ShapeIndex::from_bytes(black_box(&bytes)).unwrap()));

    let texts: Vec<Vec<f64>> = vectors(32, 128, 1).into_iter().map(|v| v.into_iter().map(f64::from).collect()).collect();
    let shapes: Vec<Vec<f64>> = vectors(32, 128, 2).into_iter().map(|v| v.into_iter().map(f64::from).collect()).collect();
    let ids: Vec<String> = (0..32).map(|i| format!("S{i}")).collect();
    c.bench_function("distances_and_mining_32", |b| {
        b.iter(|| {
            let d = pairwise_distances(black_box(&texts), &shapes).unwrap();
            mine_semihard(&d, &ids, 0.2).unwrap()
        })
    });
}

fn doe(c: &mut Criterion) {
    let design = DesignFile::screening().build().unwrap();
    let responses: Vec<f64> = (0..design.run_count()).map(|r| 40.0 + 3.0 * r as f64).collect();
    c.bench_function("range_analysis_l9", |b| b.iter(|| range_analysis(&design, black_box(&responses)).unwrap()));
    c.bench_function("anova_l9", |b| b.iter(|| anova(&design, black_box(&responses)).unwrap()));
}

criterion_group!(benches, geometry, text, encoders, retrieval, doe);
criterion_main!(benches);

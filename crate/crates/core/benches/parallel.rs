//! Sequential versus rayon execution of the data-parallel kernels.
//!
//! ```text
//! cargo bench -p trendmap --bench parallel
//! ```
//!
//! Built without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendmap::analysis::{distance_matrix, feature_vectors, kmeans};
use trendmap::gmm::{estimate_with, sample_with, CovarianceMode};
use trendmap::som::{initialize, train_from, GridSpec, InitMode, SomModel, TrainingData, TrainingSchedule};
use trendmap::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn data(rows: usize, dim: usize) -> TrainingData {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    TrainingData::from_samples(Array2::from_shape_fn((rows, dim), |_| rng.random_range(0.0..1.0)))
}

fn trained(data: &TrainingData, side: usize) -> SomModel {
    let grid = GridSpec::rectangular(side, side).unwrap();
    let mut schedule = TrainingSchedule::default_for(&grid, data.len(), 1);
    schedule.iterations = data.len();
    let init = initialize(data, grid, InitMode::Random, 1).unwrap();
    train_from(init, data, &schedule, Exec::default()).unwrap().model
}

fn bench_train(c: &mut Criterion) {
    let data = data(500, 64);
    let grid = GridSpec::rectangular(30, 30).unwrap();
    let mut schedule = TrainingSchedule::default_for(&grid, data.len(), 1);
    schedule.iterations = 500;
    let init = initialize(&data, grid, InitMode::Random, 1).unwrap();
    let mut g = c.benchmark_group("som_train_500_steps_30x30x64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_from(black_box(init.clone()), &data, &schedule, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let model = trained(&data(400, 64), 30);
    let mut g = c.benchmark_group("kmeans_900x64_k6_r10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kmeans(model.weights.view(), 6, 10, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_distances(c: &mut Criterion) {
    let model = trained(&data(400, 200), 30);
    let vectors = feature_vectors(&model);
    let mut g = c.benchmark_group("distance_matrix_200_features");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| distance_matrix(black_box(&vectors), exec)));
    }
    g.finish();
}

fn bench_gmm(c: &mut Criterion) {
    let data = data(1000, 16);
    let model = trained(&data, 12);
    let mut g = c.benchmark_group("gmm_12x12x16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("estimate", name), |b| {
            b.iter(|| estimate_with(&model, &data, 0.5, CovarianceMode::Full, exec).unwrap())
        });
    }
    let gmm = estimate_with(&model, &data, 0.5, CovarianceMode::Full, Exec::default()).unwrap();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("sample_20000", name), |b| {
            b.iter(|| sample_with(&gmm, 20_000, 5, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_train, bench_kmeans, bench_distances, bench_gmm);
criterion_main!(benches);

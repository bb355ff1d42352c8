use bgdeep_core::diffusion::{
    build_laplacian, build_weight_matrix, choose_epsilon, eigendecompose, EigenSolver,
    LaplacianMode, PointCloud,
};
use bgdeep_core::legendre::solve_quadrature;
use bgdeep_core::pipeline::{run_trial, Method, PreparedData};
use bgdeep_core::pred_ega::ZoneTables;
use bgdeep_core::synth::{synth_series, SynthProfile};
use bgdeep_core::ExperimentConfig;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn quadrature(c: &mut Criterion) {
    let nodes: Vec<f64> = (0..7).map(|i| -1.0 + i as f64 / 3.0).collect();
    c.bench_function("solve_quadrature d=7", |b| {
        b.iter(|| solve_quadrature(black_box(&nodes), 1e6).unwrap())
    });
}

fn eigen(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let series = synth_series(8, 100, 1, SynthProfile::Noisy).unwrap();
    let data = PreparedData::prepare(&series, &cfg).unwrap();
    let cloud = PointCloud::from_windows(&data.windows).unwrap();
    let eps = choose_epsilon(&cloud, 0).unwrap();
    let mut group = c.benchmark_group("eigendecompose");
    group.sample_size(10);
    for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
        group.bench_function(format!("{solver:?} n={} k=50", cloud.len()), |b| {
            b.iter(|| {
                let w = build_weight_matrix(&cloud, eps).unwrap();
                let l = build_laplacian(w, LaplacianMode::RandomWalk).unwrap();
                eigendecompose(&l, 50, solver).unwrap()
            })
        });
    }
    group.finish();
}

fn trial(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let tables = ZoneTables::default();
    let series = synth_series(25, 160, 2, SynthProfile::Noisy).unwrap();
    let data = PreparedData::prepare(&series, &cfg).unwrap();
    let mut group = c.benchmark_group("trial 25x160");
    group.sample_size(10);
    for method in [Method::Deep, Method::Tikhonov] {
        group.bench_function(method.as_str(), |b| {
            b.iter(|| run_trial(&data, &cfg, &tables, method, black_box(3)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, quadrature, eigen, trial);
criterion_main!(benches);

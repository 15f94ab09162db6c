use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use subfrac_core::fractional_solver::{solve, CaputoWeights, TimeGrid};
use subfrac_core::mc_engine::{estimate_u_grid, McConfig};
use subfrac_core::reference_oracles::{eigenmode_solution, mittag_leffler, InversionConfig};
use subfrac_core::subordinator_sim::{JumpSampler, RandomStream};
use subfrac_core::{GeneratorModel, LevySpec};

fn kernel_evaluation(c: &mut Criterion) {
    let spec = LevySpec::tempered_stable(0.5, 1.0).unwrap();
    c.bench_function("tempered G(x)", |b| {
        b.iter(|| spec.integrated_tail_g(black_box(0.37)).unwrap())
    });
    c.bench_function("mittag-leffler beta=0.5 z=-3", |b| {
        b.iter(|| mittag_leffler(black_box(0.5), black_box(-3.0)).unwrap())
    });
    let stable = LevySpec::stable(0.5).unwrap();
    let cfg = InversionConfig::default();
    c.bench_function("eigenmode inversion", |b| {
        b.iter(|| eigenmode_solution(&stable, black_box(2.0), 1.0, &cfg).unwrap())
    });
}

fn scheme(c: &mut Criterion) {
    let spec = LevySpec::tempered_stable(0.5, 1.0).unwrap();
    let model = GeneratorModel::dirichlet_laplacian_1d(8, 1.0).unwrap();
    let f0 = [1.0; 8];
    let mut group = c.benchmark_group("solve 8-state");
    group.sample_size(10);
    for n in [256usize, 1024] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        group.bench_with_input(BenchmarkId::new("weights", n), &grid, |b, g| {
            b.iter(|| CaputoWeights::build(&spec, g).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("full", n), &grid, |b, g| {
            b.iter(|| solve(&model, &spec, g, &f0).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let spec = LevySpec::tempered_stable(0.5, 1.0).unwrap();
    let sampler = JumpSampler::with_default_eps(&spec).unwrap();
    let levels = [0.25, 0.5, 1.0];
    let mut stream = 0;
    c.bench_function("tempered first passages", |b| {
        b.iter(|| {
            stream += 1;
            sampler
                .first_passages(&levels, &mut RandomStream::new(7, stream).rng())
                .unwrap()
        })
    });

    let model = GeneratorModel::dirichlet_laplacian_1d(8, 1.0).unwrap();
    let mut group = c.benchmark_group("monte carlo");
    group.sample_size(10);
    group.bench_function("8-state u, 4096 samples", |b| {
        b.iter(|| {
            estimate_u_grid(&model, &spec, &[1.0; 8], &levels, &McConfig::new(1, 4096)).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, kernel_evaluation, scheme, sampling);
criterion_main!(benches);

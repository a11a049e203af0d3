use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use csps::{
    fit_binary_logistic, run_algorithm, run_experiment, sample_dataset, AlgorithmConfig,
    FitOptions, SimulationConfig,
};
use nalgebra::DMatrix;

fn logistic_fit(c: &mut Criterion) {
    let cfg = SimulationConfig::mechanism_two();
    let d = sample_dataset(&cfg, 0);
    let x = DMatrix::from_row_slice(d.num_units(), d.num_covariates(), d.covariate_values());
    let labels: Vec<bool> = d.treatments().iter().map(|&t| t == 1).collect();
    c.bench_function("binary logistic fit, N = 800", |b| {
        b.iter(|| fit_binary_logistic(black_box(&x), black_box(&labels), &FitOptions::default()))
    });
}

fn algorithm(c: &mut Criterion) {
    let cfg = SimulationConfig::mechanism_two();
    let d = sample_dataset(&cfg, 0);
    c.bench_function("balancing algorithm, 4 targets, N = 800", |b| {
        b.iter(|| {
            run_algorithm(
                black_box(&d),
                &cfg.balancing,
                &cfg.targets,
                &AlgorithmConfig::default(),
            )
        })
    });
}

fn sampling(c: &mut Criterion) {
    let cfg = SimulationConfig::mechanism_two();
    let mut r = 0;
    c.bench_function("sample dataset, N = 800", |b| {
        b.iter_batched(
            || {
                r += 1;
                r
            },
            |rep| sample_dataset(&cfg, rep),
            BatchSize::SmallInput,
        )
    });
}

fn experiment(c: &mut Criterion) {
    let mut cfg = SimulationConfig::mechanism_two();
    cfg.replications = 10;
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    group.bench_function("10 replications", |b| b.iter(|| run_experiment(&cfg)));
    group.finish();
}

criterion_group!(benches, logistic_fit, algorithm, sampling, experiment);
criterion_main!(benches);

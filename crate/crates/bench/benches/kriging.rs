use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use krigeval::bayes::{PhiGrid, PriorKind, PriorSpec};
use krigeval::covariance::CorrelationSystem;
use krigeval::dataset::{make_grid, Rect};
use krigeval::validation::{loo_records, Method, ValidationConfig};
use krigeval::{fit_mle, phi_posterior, simulate_gp, CovarianceSpec, Family, FitOptions, Kernel, SpatialDataset};

fn field(k: usize) -> SpatialDataset {
    let spec = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 0.1, 0.0).unwrap();
    let grid = make_grid(Rect::square(0.0, 10.0), k).unwrap();
    simulate_gp(&spec, 0.5, &grid, 1).unwrap()
}

fn cholesky(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlation_system");
    for k in [9, 12, 20] {
        let ds = field(k);
        let kernel = Kernel::new(Family::EXPONENTIAL, 4.5, 0.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(k * k), &ds, |b, ds| {
            b.iter(|| CorrelationSystem::assemble(kernel, black_box(ds.positions())).unwrap())
        });
    }
    g.finish();
}

fn mle(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_mle");
    for k in [4, 9] {
        let ds = field(k);
        g.bench_with_input(BenchmarkId::from_parameter(k * k), &ds, |b, ds| {
            b.iter(|| fit_mle(black_box(ds), FitOptions::new(Family::EXPONENTIAL, 0.0)).unwrap())
        });
    }
    g.finish();
}

fn posterior(c: &mut Criterion) {
    let ds = field(9);
    let prior = PriorSpec::new(PriorKind::Vague, PhiGrid::default().build(&ds).unwrap()).unwrap();
    c.bench_function("phi_posterior/81", |b| {
        b.iter(|| phi_posterior(black_box(&ds), FitOptions::new(Family::EXPONENTIAL, 0.0), &prior).unwrap())
    });
}

fn loo(c: &mut Criterion) {
    let ds = field(9);
    let mut g = c.benchmark_group("loo/81");
    g.sample_size(20);
    for method in [Method::Ordinary, Method::Bayesian] {
        let config = ValidationConfig::new(method, Family::EXPONENTIAL);
        g.bench_function(method.tag(), |b| b.iter(|| loo_records(black_box(&ds), &config).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, cholesky, mle, posterior, loo);
criterion_main!(benches);

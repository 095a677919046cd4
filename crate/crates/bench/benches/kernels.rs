use std::hint::black_box;
use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use parisian_bench::{brownian, cramer_lundberg, drawdown, models};
use parisian_core::dividends::v_k_barrier;
use parisian_core::drawdown::{dd_exit_classical, dd_parisian_exit, dd_parisian_exit_two_barriers};
use parisian_core::montecarlo::estimate_exit;
use parisian_core::{DrawdownSpec, ParisianKernel, ScaleFunctionSet, SimConfig};

fn scale(c: &mut Criterion) {
    let mut group = c.benchmark_group("scale");
    for (name, m) in models() {
        let w = ScaleFunctionSet::new(&m, 0.1).unwrap();
        // first call builds any tables
        w.w(5.0).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| w.w(black_box(2.5)).unwrap() + w.w_prime(black_box(2.5)).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_derivative");
    for (name, m) in models() {
        let s = Arc::new(ScaleFunctionSet::new(&m, 0.1).unwrap());
        let k = ParisianKernel::with_scale(s, 0.5).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| k.log_derivative(black_box(1.0)).unwrap())
        });
    }
    group.finish();
}

fn exits(c: &mut Criterion) {
    let xi = drawdown();
    let mut group = c.benchmark_group("exit");
    group.sample_size(20);
    for (name, m) in models() {
        group.bench_function(format!("classical/{name}"), |b| {
            b.iter(|| dd_exit_classical(&m, 0.1, &xi, black_box(0.5), 3.0).unwrap())
        });
        group.bench_function(format!("parisian/{name}"), |b| {
            b.iter(|| dd_parisian_exit(&m, 0.1, 0.5, &xi, black_box(0.5), 3.0).unwrap())
        });
    }
    let eta = DrawdownSpec::constant(-2.0).unwrap();
    let xi = DrawdownSpec::constant(0.0).unwrap();
    for (name, m) in [("bm", brownian()), ("cl_exp", cramer_lundberg())] {
        group.bench_function(format!("two_barrier/{name}"), |b| {
            b.iter(|| {
                dd_parisian_exit_two_barriers(&m, 0.1, 0.5, &xi, &eta, black_box(0.5), 2.0).unwrap()
            })
        });
    }
    group.finish();
}

fn dividends(c: &mut Criterion) {
    let mut group = c.benchmark_group("dividends");
    for (name, m) in [("bm", brownian()), ("cl_exp", cramer_lundberg())] {
        group.bench_function(name, |b| {
            b.iter(|| v_k_barrier(&m, 0.1, 0.5, 1.0, 2, black_box(0.5)).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = SimConfig {
        paths: 2_000,
        threads: 1,
        ..SimConfig::default()
    };
    let xi = drawdown();
    let m = cramer_lundberg();
    let mut group = c.benchmark_group("monte_carlo");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    group.bench_function("exit/cl_exp", |b| {
        b.iter(|| estimate_exit(&m, &cfg, 0.1, 0.5, &xi, None, black_box(0.5), 3.0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, scale, kernel, exits, dividends, monte_carlo);
criterion_main!(benches);

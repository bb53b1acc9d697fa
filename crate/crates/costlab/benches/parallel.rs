//! Parallel against sequential evaluation of cost rows over a full grid.
//! Run with `--no-default-features` to see the fallback path of `map_range`.

use std::hint::black_box;
use std::sync::Arc;

use costlab::machine::{baseline_provider, BaselineConfig};
use costlab::par;
use costlab::zoo::{cost_k, cost_omega};
use costlab::Rational;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("cost rows");
    group.sample_size(10);
    for horizon in [256u64, 1024] {
        let p = Arc::new(baseline_provider(horizon, BaselineConfig::default()).unwrap());
        for (name, cost) in [("c_K", cost_k(&p)), ("Omega", cost_omega(&p))] {
            group.bench_with_input(BenchmarkId::new(format!("{name} map_range"), horizon), &horizon, |b, &h| {
                b.iter(|| black_box(par::map_range(0, h + 1, |s| cost.row(s, h))))
            });
            group.bench_with_input(BenchmarkId::new(format!("{name} sequential"), horizon), &horizon, |b, &h| {
                b.iter(|| black_box(par::map_range_seq(0, h + 1, |s| cost.row(s, h))))
            });
        }
    }
    group.finish();
}

fn sums(c: &mut Criterion) {
    let weights: Vec<Rational> = (0..4096u64).map(|i| Rational::dyadic(1, (i % 60) as u32)).collect();
    let mut group = c.benchmark_group("dyadic sums");
    group.bench_function("map_slice", |b| b.iter(|| black_box(par::map_slice(&weights, |w| w.clone() + w.clone()))));
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(weights.iter().map(|w| w.clone() + w.clone()).collect::<Vec<_>>()))
    });
    group.finish();
}

criterion_group!(benches, grid, sums);
criterion_main!(benches);

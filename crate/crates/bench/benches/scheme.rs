use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tamed_em_bench::{gbm_scheme, singular_scheme};
use tamed_em_core::scheme::{BrownianPath, CoupledScheme};

fn single_path(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_path");
    for n in [256usize, 4096] {
        let singular = singular_scheme(n).prepare(n).unwrap();
        let gbm = gbm_scheme(n).prepare(n).unwrap();
        let w = BrownianPath::generate(1, 0, 1, n);
        group.bench_with_input(BenchmarkId::new("singular_tamed", n), &w, |b, w| {
            b.iter(|| singular.simulate(black_box(w)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gbm", n), &w, |b, w| {
            b.iter(|| gbm.simulate(black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn brownian(c: &mut Criterion) {
    c.bench_function("brownian_generate_4096", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            BrownianPath::generate(7, black_box(i), 1, 4096)
        })
    });
    let fine = BrownianPath::generate(7, 0, 1, 1 << 16);
    c.bench_function("brownian_aggregate_65536_to_64", |b| {
        b.iter(|| black_box(&fine).aggregate(64).unwrap())
    });
}

fn coupled(c: &mut Criterion) {
    let levels: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let coupled = CoupledScheme::new(&singular_scheme(16), &levels, 1 << 14).unwrap();
    let w = BrownianPath::generate(3, 0, 1, 1 << 14);
    c.bench_function("coupled_levels_16_to_1024_ref_16384", |b| {
        b.iter(|| coupled.simulate(black_box(&w)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = single_path, brownian, coupled
}
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

use dpsw_bench::warmed_sketch;
use dpsw_core::build_checkpoints;

fn bench_observe(c: &mut Criterion) {
    let (mut sketch, items) = warmed_sketch();
    let mut group = c.benchmark_group("observe");
    group.throughput(Throughput::Elements(1));
    let mut cursor = 0usize;
    group.bench_function("steady_state", |b| {
        b.iter(|| {
            sketch.observe(items[cursor]);
            cursor = (cursor + 1) % items.len();
        })
    });
    group.finish();
}

fn bench_queries(c: &mut Criterion) {
    let (sketch, items) = warmed_sketch();
    let mut group = c.benchmark_group("query");
    let mut cursor = 0usize;
    group.bench_function("window_frequency", |b| {
        b.iter(|| {
            let item = items[cursor];
            cursor = (cursor + 1) % items.len();
            black_box(sketch.estimate_window_frequency(item))
        })
    });
    group.sample_size(20);
    group.bench_function("heavy_hitters_full_domain", |b| {
        b.iter(|| black_box(sketch.heavy_hitters(0.01).len()))
    });
    group.finish();
}

fn bench_checkpoints(c: &mut Criterion) {
    let mut group = c.benchmark_group("checkpoints");
    group.bench_function("build_L1e4_sparse", |b| {
        b.iter(|| black_box(build_checkpoints(10_000, 0.995).unwrap().len()))
    });
    group.bench_function("build_L1e4_halving", |b| {
        b.iter(|| black_box(build_checkpoints(10_000, 0.5).unwrap().len()))
    });
    group.finish();
}

criterion_group!(benches, bench_observe, bench_queries, bench_checkpoints);
criterion_main!(benches);

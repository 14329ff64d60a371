use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qgraph::{diameter, fem_spectrum, secular_eigenvalues, FemSettings, ScanOptions};
use qgraph_bench::{comb, pool_graph, star};

fn fem(c: &mut Criterion) {
    let mut group = c.benchmark_group("fem");
    group.sample_size(20);
    let (g, cond) = star(5);
    group.bench_function("5-star k=5 h=5e-3", |b| b.iter(|| fem_spectrum(black_box(&g), &cond, 5, &FemSettings::default()).unwrap()));
    let (g, cond) = pool_graph(3);
    group.bench_function("pool seed 3 k=5", |b| b.iter(|| fem_spectrum(black_box(&g), &cond, 5, &FemSettings::default()).unwrap()));
    let (g, cond) = comb(1.5, 200);
    let s = FemSettings { h: 1e-3, ..FemSettings::default() };
    group.bench_function("comb 200 teeth k=3 h=1e-3", |b| b.iter(|| fem_spectrum(black_box(&g), &cond, 3, &s).unwrap()));
    group.finish();
}

fn secular(c: &mut Criterion) {
    let mut group = c.benchmark_group("secular");
    group.sample_size(20);
    for seed in [1, 3] {
        let (g, cond) = pool_graph(seed);
        group.bench_function(format!("pool seed {seed} k=5"), |b| {
            b.iter(|| secular_eigenvalues(black_box(&g), &cond, 5, &ScanOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn diameters(c: &mut Criterion) {
    let (g, _) = pool_graph(3);
    c.bench_function("diameter pool seed 3", |b| b.iter(|| diameter(black_box(&g), 1e-3).unwrap()));
    let (g, _) = comb(1.5, 400);
    c.bench_function("diameter comb 400 teeth", |b| b.iter(|| diameter(black_box(&g), 1e-3).unwrap()));
}

criterion_group!(benches, fem, secular, diameters);
criterion_main!(benches);

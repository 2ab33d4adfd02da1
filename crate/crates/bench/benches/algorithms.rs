use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairdiv_bench::{instance, queries};
use fairdiv_core::Algorithm;

fn bench(c: &mut Criterion, algorithm: Algorithm, n: usize, ms: &[usize]) {
    let mut group = c.benchmark_group(format!("{}/n={n}", algorithm.name()));
    for &m in ms {
        let inst = instance(algorithm, n, m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &inst, |b, inst| {
            b.iter(|| queries(inst, algorithm))
        });
    }
    group.finish();
}

fn algorithms(c: &mut Criterion) {
    bench(c, Algorithm::Ef1Two, 2, &[256, 4096, 65536]);
    bench(c, Algorithm::Ef1Identical, 4, &[256, 4096, 65536]);
    bench(c, Algorithm::Prop1, 3, &[256, 4096, 65536]);
    bench(c, Algorithm::Ef1Three, 3, &[256, 4096]);
    bench(c, Algorithm::Prop1Mms, 3, &[64, 256, 1024]);
}

criterion_group!(benches, algorithms);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use defchars::Metric;
use defchars_bench::{defchars_store, image_store, random_defchars, rng, LARGEST_DATASET};

fn defchars_retrieval(c: &mut Criterion) {
    let store = defchars_store(LARGEST_DATASET, 1);
    let query = random_defchars(&mut rng(2));
    let mut group = c.benchmark_group("retrieve_defchars_7007");
    for m in Metric::FEATURE {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| store.retrieve(&query, m, 20).unwrap())
        });
    }
    group.finish();
}

fn image_retrieval(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrieve_raw_7007");
    group.sample_size(20);
    for side in [8, 20] {
        let store = image_store(LARGEST_DATASET, side, 3);
        let query = store.entries()[0].payload.clone();
        for m in Metric::IMAGE {
            group.bench_with_input(BenchmarkId::new(m.to_string(), side), &m, |b, &m| {
                b.iter(|| store.retrieve(&query, m, 20).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, defchars_retrieval, image_retrieval);
criterion_main!(benches);

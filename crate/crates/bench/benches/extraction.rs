use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use defchars::evaluation::{run_benchmark, EvalConfig};
use defchars::features::{extract_defchars, extract_payload};
use defchars::{FeatureKind, Metric};
use defchars_bench::random_records;

fn extraction(c: &mut Criterion) {
    let records = random_records(64, 64, 4);
    let mut group = c.benchmark_group("extract");
    group.bench_function("defchars_raw", |b| {
        b.iter(|| {
            for r in &records {
                extract_defchars(r, &[]).unwrap();
            }
        })
    });
    for (kind, side) in [(FeatureKind::RawImage, 20), (FeatureKind::Lbp, 20), (FeatureKind::Lbp, 100)] {
        group.bench_with_input(BenchmarkId::new(kind.to_string(), side), &side, |b, &side| {
            b.iter(|| {
                for r in &records {
                    extract_payload(kind, Some(side), r, &[]).unwrap();
                }
            })
        });
    }
    group.finish();
}

fn leave_one_out(c: &mut Criterion) {
    let records = random_records(1000, 48, 5);
    let config = EvalConfig::new(FeatureKind::DefChars, Metric::Manhattan, None);
    let mut group = c.benchmark_group("leave_one_out");
    group.sample_size(10);
    group.bench_function("defchars_manhattan_1000", |b| b.iter(|| run_benchmark(&records, &config).unwrap()));
    group.finish();
}

criterion_group!(benches, extraction, leave_one_out);
criterion_main!(benches);

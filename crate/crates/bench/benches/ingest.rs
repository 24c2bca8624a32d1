use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lifectx::ingest::{parse_records, window_assign, Format, WindowSpec};
use lifectx::su;
use lifectx_bench::{gps_csv, gps_records, origin};

fn parse(c: &mut Criterion) {
    let desc = Arc::new(su::descriptors().into_iter().find(|d| d.stream_id == su::GPS).unwrap());
    let mut group = c.benchmark_group("parse_records");
    for n in [10_000usize, 100_000] {
        let csv = gps_csv(n, 3);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("csv", n), &csv, |b, csv| {
            b.iter(|| parse_records(csv.as_bytes(), Arc::clone(&desc), Format::Csv, false).count())
        });
    }
    group.finish();
}

fn assign(c: &mut Criterion) {
    let spec = WindowSpec::new(origin(), 1800).unwrap();
    let mut group = c.benchmark_group("window_assign");
    for n in [10_000usize, 100_000] {
        let records = gps_records(n, 3);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &records, |b, records| {
            b.iter(|| window_assign(records.iter().cloned(), spec, 2).count())
        });
    }
    group.finish();
}

criterion_group!(benches, parse, assign);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use inboxaudit_bench::{demo_corpus, fixture_rows, weekly_series};
use inboxaudit_core::cluster::{kmeans, select_k, standardize};
use inboxaudit_core::corpus::{ingest_files, AliasRegistry, ParseOptions};
use inboxaudit_core::report::{fixture_check, FixtureTable};
use inboxaudit_core::synth::MX_HOST;
use inboxaudit_core::temporal::{decompose_additive, spectrum_peaks};

fn clustering(c: &mut Criterion) {
    let z = standardize(&fixture_rows()).unwrap().data;
    c.bench_function("kmeans k=2 x10 restarts (109 rows)", |b| {
        b.iter(|| kmeans(black_box(&z), 2, 42, 10).unwrap())
    });
    c.bench_function("select_k 2..=10 (109 rows)", |b| {
        b.iter(|| select_k(black_box(&z), 2, 10, 42).unwrap())
    });
}

fn temporal(c: &mut Criterion) {
    let s = weekly_series(361);
    c.bench_function("spectrum peaks (361 days)", |b| {
        b.iter(|| spectrum_peaks(black_box(&s)).unwrap())
    });
    c.bench_function("additive decomposition (361 days)", |b| {
        b.iter(|| decompose_additive(black_box(&s), 7).unwrap())
    });
}

fn ingest(c: &mut Criterion) {
    let (emails, registry_csv) = demo_corpus(12, 30);
    let registry = AliasRegistry::from_reader(registry_csv.as_bytes(), "bench registry").unwrap();
    let opts = ParseOptions {
        trusted_mx: Some(MX_HOST.into()),
        timezone: chrono_tz::UTC,
    };
    let mut group = c.benchmark_group("ingest");
    group.sample_size(20);
    group.bench_function(format!("{} messages", emails.len()), |b| {
        b.iter(|| ingest_files(black_box(&emails), &registry, &opts))
    });
    group.finish();
}

fn fixture(c: &mut Criterion) {
    let t = FixtureTable::bundled();
    c.bench_function("fixture check", |b| b.iter(|| fixture_check(black_box(&t))));
}

criterion_group!(benches, clustering, temporal, ingest, fixture);
criterion_main!(benches);

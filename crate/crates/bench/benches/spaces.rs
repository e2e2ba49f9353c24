use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lscd_bench::{corpora, counts};
use lscd_core::spaces::{make_random_matrix, ppmi_transform, random_index, svd_reduce, train_sgns};
use lscd_core::{SpaceConfig, Vocabulary, WindowPolicy};

fn count_and_ppmi(c: &mut Criterion) {
    let (a, _) = corpora(50_000);
    c.bench_function("count_matrix 50k tokens", |bench| bench.iter(|| counts(&a)));
    let m = counts(&a);
    c.bench_function("ppmi_transform", |bench| bench.iter(|| ppmi_transform(&m, 1.0, 0.75).unwrap()));
}

fn reduce(c: &mut Criterion) {
    let (a, _) = corpora(50_000);
    let ppmi = ppmi_transform(&counts(&a), 1.0, 0.75).unwrap();
    let mut group = c.benchmark_group("svd_reduce");
    group.sample_size(10);
    for d in [10, 50] {
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |bench, &d| {
            bench.iter(|| svd_reduce(&ppmi, d, 0.0).unwrap())
        });
    }
    group.finish();

    let m = counts(&a);
    let random = make_random_matrix(m.col_vocab().clone(), 300, 2, 0).unwrap();
    c.bench_function("random_index d=300", |bench| bench.iter(|| random_index(&m, &random, None, 0).unwrap()));
}

fn sgns(c: &mut Criterion) {
    let (a, _) = corpora(20_000);
    let vocab = Vocabulary::from_corpus(&a);
    let cfg = SpaceConfig {
        dim: 50,
        k: 5,
        epochs: 1,
        window: WindowPolicy::fixed(5),
        ..Default::default()
    };
    let mut group = c.benchmark_group("sgns");
    group.sample_size(10);
    group.bench_function("one epoch 20k tokens", |bench| {
        bench.iter(|| train_sgns(&a, vocab.clone(), &cfg, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, count_and_ppmi, reduce, sgns);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lscd_bench::{corpora, counts};
use lscd_core::align::{column_intersect, orthogonal_procrustes, ProcrustesVariant};
use lscd_core::eval::spearman_rho;
use lscd_core::measures::{jensen_shannon_distance, local_neighborhood_distance};
use lscd_core::spaces::{ppmi_transform, svd_reduce};

fn alignment(c: &mut Criterion) {
    let (a, b) = corpora(50_000);
    let (pa, pb) = (
        ppmi_transform(&counts(&a), 1.0, 0.75).unwrap(),
        ppmi_transform(&counts(&b), 1.0, 0.75).unwrap(),
    );
    c.bench_function("column_intersect", |bench| bench.iter(|| column_intersect(&pa, &pb).unwrap()));

    let (ea, eb) = (svd_reduce(&pa, 50, 0.0).unwrap(), svd_reduce(&pb, 50, 0.0).unwrap());
    let mut group = c.benchmark_group("procrustes");
    for variant in [ProcrustesVariant::Standard, ProcrustesVariant::NoCentering, ProcrustesVariant::Extended] {
        group.bench_with_input(BenchmarkId::from_parameter(variant.tag()), &variant, |bench, &v| {
            bench.iter(|| orthogonal_procrustes(&ea, &eb, v).unwrap())
        });
    }
    group.finish();

    let (pair, _) = orthogonal_procrustes(&ea, &eb, ProcrustesVariant::Standard).unwrap();
    c.bench_function("lnd k=25", |bench| {
        bench.iter(|| local_neighborhood_distance(&pair.a, &pair.b, "target05", 25).unwrap())
    });
}

fn small_measures(c: &mut Criterion) {
    let p: Vec<f64> = (1..=64).map(|i| i as f64).collect();
    let total: f64 = p.iter().sum();
    let p: Vec<f64> = p.iter().map(|x| x / total).collect();
    let q: Vec<f64> = p.iter().rev().copied().collect();
    c.bench_function("jsd 64", |bench| bench.iter(|| jensen_shannon_distance(&p, &q).unwrap()));

    let x: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
    let y: Vec<f64> = (0..1000).map(|i| ((i * 53) % 97) as f64).collect();
    c.bench_function("spearman 1000 with ties", |bench| bench.iter(|| spearman_rho(&x, &y).unwrap()));
}

criterion_group!(benches, alignment, small_measures);
criterion_main!(benches);

//! Compares the rayon data-parallel entry points against their sequential
//! counterparts on the sampling-dominated workloads: batch chain draws and
//! moment estimation. Run with `cargo bench -p robust-ising`; build with
//! `--no-default-features` to confirm the crate works fully sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use robust_ising::glauber::{sample_batch, sample_batch_serial, ChainConfig};
use robust_ising::model::random_bounded_model;
use robust_ising::moments::estimate_moments_of_samples;
use robust_ising::suffstats::SuffStatSpec;

fn bench_sample_batch(c: &mut Criterion) {
    let params = random_bounded_model(8, 0.45, 0.0, 11);
    let chain = ChainConfig::new(0.05, 20.0, 7).unwrap();
    let mut group = c.benchmark_group("sample_batch");
    group.sample_size(20);
    for &n in &[500usize, 2000] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| sample_batch(&params, n, &chain).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", n), &n, |b, &n| {
            b.iter(|| sample_batch_serial(&params, n, &chain).unwrap())
        });
    }
    group.finish();
}

fn bench_moment_pipeline(c: &mut Criterion) {
    let params = random_bounded_model(8, 0.45, 0.0, 13);
    let chain = ChainConfig::new(0.05, 20.0, 9).unwrap();
    let spec = SuffStatSpec::zero_field(8);
    let n = 2000;
    let mut group = c.benchmark_group("moments");
    group.sample_size(20);
    group.bench_function("sample_parallel_then_moments", |b| {
        b.iter(|| {
            let samples = sample_batch(&params, n, &chain).unwrap();
            estimate_moments_of_samples(&samples, &spec, chain.gamma).unwrap()
        })
    });
    group.bench_function("sample_serial_then_moments", |b| {
        b.iter(|| {
            let samples = sample_batch_serial(&params, n, &chain).unwrap();
            estimate_moments_of_samples(&samples, &spec, chain.gamma).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_sample_batch, bench_moment_pipeline);
criterion_main!(benches);

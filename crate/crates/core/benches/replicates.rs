//! Parallel vs sequential replicate evaluation on representative Monte
//! Carlo workloads. Both paths produce bit-identical output; the bench
//! quantifies what the rayon pool buys at different replicate counts.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ribound::exec::{replicate_map, replicate_map_seq};
use ribound::families::Family;
use ribound::norms::lp_norm_empirical;
use ribound::rng::StreamKey;

fn deviation_workload(key: StreamKey, n: u64) -> impl Fn(u64) -> f64 + Sync + Send {
    let fam = Family::GaussianShift;
    move |r: u64| {
        let mut s = key.stream(r);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += fam.draw(0.0, &mut s).unwrap();
        }
        acc / (n as f64).sqrt()
    }
}

fn bench_normalized_sums(c: &mut Criterion) {
    let key = StreamKey::new(1234, 99);
    let n = 64u64;
    let mut group = c.benchmark_group("normalized_sums");
    for reps in [1_000u64, 10_000, 100_000] {
        group.bench_with_input(BenchmarkId::new("parallel", reps), &reps, |b, &reps| {
            b.iter(|| {
                let v = replicate_map(reps, deviation_workload(key, n));
                black_box(lp_norm_empirical(&v, 4.0).unwrap())
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", reps), &reps, |b, &reps| {
            b.iter(|| {
                let v = replicate_map_seq(reps, deviation_workload(key, n));
                black_box(lp_norm_empirical(&v, 4.0).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_stable_draws(c: &mut Criterion) {
    let key = StreamKey::new(77, 1);
    let fam = Family::symmetric_stable(1.5).unwrap();
    let mut group = c.benchmark_group("stable_draws");
    let reps = 50_000u64;
    let work = move |r: u64| {
        let mut s = key.stream(r);
        fam.draw(0.0, &mut s).unwrap().abs()
    };
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(replicate_map(reps, &work)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(replicate_map_seq(reps, &work)))
    });
    group.finish();
}

criterion_group!(benches, bench_normalized_sums, bench_stable_draws);
criterion_main!(benches);

//! Accuracy-sweep throughput: the rayon fan-out against the sequential
//! fallback on the same seeded workload. Outcomes are bit-identical; only
//! wall time differs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lumitrace_core::radio::RadioModel;
use lumitrace_core::sim::{accuracy_sweep_sequential, DeploymentScenario, SweepConfig};

#[cfg(feature = "parallel")]
use lumitrace_core::sim::accuracy_sweep_parallel;

fn sweep_config(trials: usize) -> SweepConfig {
    SweepConfig {
        base: DeploymentScenario {
            seed: 42,
            ..DeploymentScenario::default()
        },
        beacon_counts: (1..=6).collect(),
        trials,
    }
}

fn bench_sweep(c: &mut Criterion) {
    let model = RadioModel::default();
    let mut group = c.benchmark_group("accuracy_sweep");
    group.sample_size(10);

    for trials in [512, 4096] {
        let config = sweep_config(trials);
        group.bench_with_input(
            BenchmarkId::new("sequential", trials),
            &config,
            |b, config| {
                b.iter(|| accuracy_sweep_sequential(black_box(config), &model).unwrap())
            },
        );
        #[cfg(feature = "parallel")]
        group.bench_with_input(
            BenchmarkId::new("parallel", trials),
            &config,
            |b, config| b.iter(|| accuracy_sweep_parallel(black_box(config), &model).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);

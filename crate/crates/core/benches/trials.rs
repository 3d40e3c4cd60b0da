//! Sequential loop against the rayon pool on the same Monte Carlo batch.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use coopmimo::harness::{run_experiment, ExperimentSpec, Mode};
use coopmimo::par::Execution;

fn batch(mode: Mode) -> ExperimentSpec {
    let mut spec = ExperimentSpec {
        trials: 64,
        mode,
        ..Default::default()
    };
    spec.network.antennas = 16;
    spec.network.users_per_cell = 2;
    spec
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for (label, mode) in [("finite", Mode::Finite), ("asymptotic", Mode::Asymptotic)] {
        let spec = batch(mode);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel { threads: None })] {
            group.bench_with_input(BenchmarkId::new(name, label), &spec, |b, spec| {
                b.iter(|| run_experiment(spec, exec, |_| Ok(())).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);

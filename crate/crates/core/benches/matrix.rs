use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use igdm::exec::Execution;
use igdm::harness::{cells, run_cell, ExperimentConfig, Noise, ProblemSpec};

fn config() -> ExperimentConfig {
    ExperimentConfig {
        problems: vec![ProblemSpec::LeastSquares(20), ProblemSpec::ImageRestoration(20)],
        noise: vec![Noise::Off, Noise::On],
        seeds: vec![1, 2],
        ..ExperimentConfig::default()
    }
}

fn bench_matrix(c: &mut Criterion) {
    let cfg = config();
    let jobs = cells(&cfg);
    let mut group = c.benchmark_group("matrix");
    group.sample_size(10);
    for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Auto)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &exec| {
            b.iter(|| {
                igdm::exec::map(exec, jobs.clone(), |cell| {
                    run_cell(&cfg, &cell).map(|r| r.meta.final_best).ok()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_matrix);
criterion_main!(benches);

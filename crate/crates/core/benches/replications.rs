//! Sequential vs rayon replication loops on tail and moment estimation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use contraction_bounds::chains::{make_model, ExampleSpec, FunctionalSpec, InitLaw, ModelSpec, NoiseSpec};
use contraction_bounds::montecarlo::{estimate_moment_norm, estimate_tail, GridPolicy};
use contraction_bounds::par::Exec;

fn model() -> contraction_bounds::chains::ChainModel {
    make_model(ModelSpec {
        example: ExampleSpec::LinearSa {
            a: vec![vec![1.0]],
            b: vec![0.0],
            gamma: 0.5,
            alpha: 0.5,
        },
        noise: NoiseSpec::Gaussian { sigma: 1.0, d: 1 },
        init: InitLaw::Point { x: vec![0.0] },
        p: 2.0,
    })
    .unwrap()
}

fn tail(c: &mut Criterion) {
    let m = model();
    let mut g = c.benchmark_group("estimate_tail_n200");
    g.sample_size(10);
    for reps in [2_000usize, 20_000] {
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            g.bench_with_input(BenchmarkId::new(name, reps), &reps, |b, &reps| {
                b.iter(|| {
                    estimate_tail(&m, &FunctionalSpec::SumOfStates, 200, reps, &GridPolicy::default(), 1, exec)
                        .map(|t| black_box(t.p_hat.len()))
                        .unwrap()
                })
            });
        }
    }
    g.finish();
}

fn moment(c: &mut Criterion) {
    let m = model();
    let mut g = c.benchmark_group("estimate_moment_n200");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(name, |b| {
            b.iter(|| {
                estimate_moment_norm(&m, &FunctionalSpec::SumOfStates, 200, 10_000, 2.0, 1, exec)
                    .map(|e| black_box(e.estimate))
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, tail, moment);
criterion_main!(benches);

//! Sequential versus rayon execution of the data-parallel kernels: the
//! Hilbert–Schmidt double sum, the randomized coercivity trials, an ε̂-sweep
//! of coupled runs and a Kuramoto–Sivashinsky ensemble.
//!
//! Run with `cargo bench -p phaseturb`. Built without the `parallel` feature
//! both paths execute on one thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use phaseturb::coercive::{coercivity_check, eps_bounds, gamma_hs_sum};
use phaseturb::experiments::{ks_attractor_experiment, run_sweep, KsAttractorConfig, RunConfig};
use phaseturb::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn hs_sum(c: &mut Criterion) {
    let mut group = c.benchmark_group("gamma_hs_sum");
    group.sample_size(10);
    for l in [25.0, 50.0] {
        let eps = eps_bounds(l).binding;
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, l), &l, |b, &l| {
                b.iter(|| black_box(gamma_hs_sum(l, eps, 4096, exec)))
            });
        }
    }
    group.finish();
}

fn coercivity(c: &mut Criterion) {
    let mut group = c.benchmark_group("coercivity_check");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 64), &64usize, |b, &trials| {
            b.iter(|| black_box(coercivity_check(trials, 25.0, None, 0.25, 1, exec).unwrap()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let base = RunConfig { n: 128, t_end: 2.0, transient: 0.5, snapshot_interval: 0.5, ..RunConfig::default() };
    let eps = [0.1, 0.05, 0.025];
    let mut group = c.benchmark_group("eps_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(run_sweep(&base, &eps, exec).unwrap())));
    }
    group.finish();
}

fn ks_ensemble(c: &mut Criterion) {
    let cfg = KsAttractorConfig { ls: vec![25.0, 50.0], t_end: 20.0, ensemble: 4, ..KsAttractorConfig::default() };
    let mut group = c.benchmark_group("ks_ensemble");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(ks_attractor_experiment(&cfg, exec).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, hs_sum, coercivity, sweep, ks_ensemble);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qitags_core::analysis::{alpha_sweep_with, brute_force_optimal_with, default_alphas, generate_instance, GeneratorConfig};
use qitags_core::learning::{roster_dataset, uniform_envelope, GpHyper};
use qitags_core::motion::PathCache;
use qitags_core::search::{qitags_solve_with, SearchConfig};
use qitags_core::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn largest_instance() -> qitags_core::ProblemDomain {
    let cfg = GeneratorConfig::default();
    (0..200)
        .map(|seed| generate_instance(seed, &cfg).unwrap())
        .max_by_key(|d| d.num_tasks() * d.num_robots())
        .unwrap()
}

fn oracle(c: &mut Criterion) {
    let domain = largest_instance();
    let mut group = c.benchmark_group("brute_force_optimal");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| brute_force_optimal_with(&domain, exec, &PathCache::new()).unwrap())
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let domain = largest_instance().with_alpha(0.2).unwrap();
    let mut group = c.benchmark_group("qitags_solve");
    for (name, execution) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| qitags_solve_with(&domain, &SearchConfig { execution }, &PathCache::new()).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let domain = largest_instance();
    let alphas = default_alphas();
    let mut group = c.benchmark_group("alpha_sweep");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| alpha_sweep_with(&domain, &alphas, exec).unwrap()));
    }
    group.finish();
}

fn learning(c: &mut Criterion) {
    let data = roster_dataset(0, 0);
    let split = data.split(0.2, 0).unwrap();
    let labels = &split.pool_labels;
    let hyper = GpHyper::defaults_for(data.dim());
    let seeds: Vec<u64> = (0..20).collect();
    let mut group = c.benchmark_group("uniform_envelope");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| uniform_envelope(|i, _: &[f64]| Ok(labels[i]), &split.pool, &split.eval, 30, hyper, &seeds, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, search, sweep, learning);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use markov_sampler::{
    brute_force_deterministic, run_policy_batch, run_sweep, Execution, MarkovChain, MarkovPolicy,
    Problem, SamplingModel, SweepProblem, SweepSpec,
};

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn sweep(c: &mut Criterion) {
    let grid: Vec<f64> = (1..=9).map(|k| f64::from(k) / 10.0).collect();
    let spec = SweepSpec {
        problem: SweepProblem::MaxInterval(vec![1.0]),
        p12: grid.clone(),
        p21: grid,
        m_max: 16,
    };
    let mut group = c.benchmark_group("sweep_9x9_p2");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep(black_box(&spec), exec))
        });
    }
    group.finish();
}

fn brute_force(c: &mut Criterion) {
    let chain = MarkovChain::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.3, 0.4, 0.3],
        vec![0.1, 0.3, 0.6],
    ])
    .unwrap();
    let model = SamplingModel::new(chain, 20).unwrap();
    let problem = Problem::MaxInterval { age_limit: 1.0 };
    let mut group = c.benchmark_group("brute_force_3_states_m20");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| brute_force_deterministic(black_box(&model), problem, exec).unwrap())
        });
    }
    group.finish();
}

fn simulation_batch(c: &mut Criterion) {
    let chain = MarkovChain::two_state(0.9, 0.9).unwrap();
    let policy = MarkovPolicy::from_rows(vec![vec![0.0, 0.899, 0.101, 0.0]; 2]).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("simulate_8_seeds_100k");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_policy_batch(&chain, &policy, 100_000, black_box(&seeds), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, brute_force, simulation_batch);
criterion_main!(benches);

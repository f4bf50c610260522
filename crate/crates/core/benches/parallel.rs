use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mtrl_core::evaluation::{evaluate_start, OraclePolicy};
use mtrl_core::gridworld::{GridConfig, GridLayout, GridWorld, TaskDistribution};
use mtrl_core::representation::{train, SamplePlan, TrainConfig};
use mtrl_core::sampling::{BasisMode, SamplingDistribution};
use mtrl_core::{seed, Execution};

const MAP: &str = "S..#\n.#..\n.#.#\n..G#\n";

fn base() -> GridConfig {
    GridConfig {
        layout: GridLayout::parse(MAP).unwrap(),
        obs_dim: 20,
        noise_std: 0.1,
        deviation_prob: 0.05,
        horizon: 4,
        reward_noise: 0.0,
    }
}

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn bench_training(c: &mut Criterion) {
    let base = base();
    let mut rng = seed::rng(1);
    let tasks: Vec<GridWorld> = (0..8)
        .map(|_| GridWorld::new(TaskDistribution::default().sample(&base, &mut rng).unwrap()).unwrap())
        .collect();
    let dist = SamplingDistribution::barycentric_basis(&tasks[0], BasisMode::Balanced).unwrap();
    let cfg = TrainConfig {
        samples: SamplePlan::Iid(500),
        rank: 16,
        ridge_lambda: 0.01,
        seed: 7,
        min_norm_fallback: false,
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| train(&tasks, &dist, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let world = GridWorld::new(base()).unwrap();
    let policy = OraclePolicy::new(&world).unwrap();
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(20);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate_start(&policy, &world, 2000, 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_training, bench_evaluation);
criterion_main!(benches);

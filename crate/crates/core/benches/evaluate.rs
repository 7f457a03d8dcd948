use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use langfeed::harness::eval::{evaluate, EvalConfig};
use langfeed::{EnvConfig, Execution};

const WORKLOADS: [(&str, &str); 4] = [
    ("gridworld", "fp-follower"),
    ("bandit:TenArmedGaussian", "epsilon-greedy"),
    ("optimization:rosenbrock", "sign-descent"),
    ("parking", "random"),
];

fn execution_modes(c: &mut Criterion) {
    let mut modes = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        modes.push(("parallel", Execution::Parallel));
    }
    for (env, agent) in WORKLOADS {
        let mut group = c.benchmark_group(format!("evaluate/{env}"));
        group.sample_size(10);
        for (name, execution) in &modes {
            let config = EvalConfig::new(EnvConfig::new(env), agent, 64, 0).execution(*execution);
            group.bench_with_input(BenchmarkId::from_parameter(name), &config, |b, config| {
                b.iter(|| black_box(evaluate(config).expect("evaluation runs")))
            });
        }
        group.finish();
    }
}

criterion_group!(benches, execution_modes);
criterion_main!(benches);

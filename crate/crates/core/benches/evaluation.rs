use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use feederopt::exec::map_indices;
use feederopt::pso::init_swarm;
use feederopt::{brute_force, build_graph, evaluate, load_scenario, Execution, Solution};

fn fixture(name: &str) -> feederopt::Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"));
    load_scenario(path).unwrap()
}

/// One epoch's worth of swarm evaluations.
fn swarm_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("swarm_evaluation");
    for name in ["t1", "t3"] {
        let mut sc = fixture(name);
        sc.solver.pso.particles = 40;
        let g = build_graph(&sc).unwrap();
        let swarm = init_swarm(&sc);
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), name), &exec, |b, &exec| {
                b.iter(|| {
                    map_indices(swarm.particles.len(), exec, |i| {
                        evaluate(&Solution::from_flat(&sc, &swarm.particles[i].position), &sc, &g).objective
                    })
                })
            });
        }
    }
    group.finish();
}

fn oracle_grid(c: &mut Criterion) {
    let sc = fixture("t1");
    let g = build_graph(&sc).unwrap();
    let mut group = c.benchmark_group("oracle_grid");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| {
                brute_force(&sc, &g, black_box(&[0.0, 5.0, 10.0]), &[0.0, 100.0], exec).unwrap().best_eval.objective
            })
        });
    }
    group.finish();
}

criterion_group!(benches, swarm_evaluation, oracle_grid);
criterion_main!(benches);

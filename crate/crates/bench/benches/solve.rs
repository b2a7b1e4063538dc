use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffwalker::{solve_rw, SolverConfig, SolverMethod};
use diffwalker_bench::Problem;

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_rw");
    group.sample_size(10);
    for side in [32, 64, 128] {
        let problem = Problem::new(side, 4, 1);
        for method in [SolverMethod::Cholesky, SolverMethod::ConjugateGradient] {
            let config = SolverConfig {
                method,
                ..SolverConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), side), &problem, |b, p| {
                b.iter(|| solve_rw(&p.blocks, &config).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, solve);
criterion_main!(benches);

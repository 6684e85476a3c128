use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hessquot::exprlang::parse;
use hessquot::pde::{assemble, Domain, Field, ProblemSpec, RectGrid, Structural};
use hessquot::{Execution, OperatorSignature};

fn problem() -> ProblemSpec {
    ProblemSpec::new(
        OperatorSignature::new(3, 2, 2, 0).unwrap(),
        Domain::Box {
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        },
        parse("sqrt((2 - 0.1*sin(x1))*(6 - 0.1*sin(x1))) + u - (r^2/2 + 0.1*sin(x1))", 3).unwrap(),
        parse("nu1*(x1 + 0.1*cos(x1)) + nu2*x2 + nu3*x3 - (u - (r^2/2 + 0.1*sin(x1)))", 3).unwrap(),
        Structural::with_defaults(),
    )
    .unwrap()
}

fn bench_assembly(c: &mut Criterion) {
    let prob = problem();
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for m in [12usize, 24] {
        let grid = Arc::new(RectGrid::cube(vec![0.0; 3], vec![1.0; 3], m).unwrap());
        let u = Field::from_fn(grid, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.1 * x[0].sin());
        for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            group.bench_with_input(BenchmarkId::new(format!("residual/{name}"), m), &m, |b, _| {
                b.iter(|| black_box(assemble(&u, &prob, false, exec).unwrap()))
            });
            group.bench_with_input(BenchmarkId::new(format!("jacobian/{name}"), m), &m, |b, _| {
                b.iter(|| black_box(assemble(&u, &prob, true, exec).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_assembly);
criterion_main!(benches);

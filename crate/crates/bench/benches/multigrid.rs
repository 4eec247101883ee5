use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use std::sync::Arc;

use dgmg::mesh::{build_initial_mesh, classify_edges, refine_uniform};
use dgmg::{Coefficients, CycleConfig, CycleKind, DgSpace, Domain, LevelOperators, PairField};
use dgmg_bench::{random_pair, square_stack};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    let mut mesh = build_initial_mesh(Domain::UnitSquare);
    for k in 1..=4 {
        mesh = refine_uniform(&mesh);
        let space = DgSpace::new(Arc::new(classify_edges(&mesh, |_| [1.0, 0.0])));
        group.bench_with_input(BenchmarkId::from_parameter(k), &space, |b, space| {
            b.iter(|| {
                LevelOperators::assemble(space, 1e-2, 6.0, Coefficients::horizontal_wind()).unwrap()
            })
        });
    }
    group.finish();
}

fn preconditioner(c: &mut Criterion) {
    let stack = square_stack(1e-2, 4);
    let mut group = c.benchmark_group("apply_ck_inverse");
    for k in [2, 4] {
        let x = random_pair(stack.level(k).dof_count(), 1);
        group.bench_with_input(BenchmarkId::from_parameter(k), &x, |b, x| {
            b.iter(|| stack.apply_preconditioner(k, black_box(x)))
        });
    }
    group.finish();
}

fn w_cycle(c: &mut Criterion) {
    let stack = square_stack(1e-2, 4);
    let mut group = c.benchmark_group("w_cycle_m4");
    group.sample_size(10);
    let cfg = CycleConfig::symmetric(4, CycleKind::W).unwrap();
    for k in [2, 4] {
        let n = stack.level(k).dof_count();
        let x0 = random_pair(n, 2);
        let b0 = PairField::zeros(n);
        group.bench_with_input(BenchmarkId::from_parameter(k), &x0, |b, x0| {
            b.iter(|| stack.mg_solve(k, &b0, black_box(x0), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, preconditioner, w_cycle);
criterion_main!(benches);

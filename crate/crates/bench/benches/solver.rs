use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tikhlav::{assemble_fredholm, assemble_poisson, solve, DomainGrid, KernelSpec, LavrentievSign};
use tikhlav_bench::{binding_scenario, interior_scenario};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for n in [64, 128] {
        let g = DomainGrid::new(1, n).unwrap();
        group.bench_with_input(BenchmarkId::new("poisson_1d", n), &g, |b, g| {
            b.iter(|| assemble_poisson(g).unwrap())
        });
        let k = KernelSpec::Gaussian {
            scale: 1.0,
            width: 0.2,
        };
        group.bench_with_input(BenchmarkId::new("fredholm_1d", n), &g, |b, g| {
            b.iter(|| assemble_fredholm(g, k).unwrap())
        });
    }
    group.finish();
}

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for n in [16, 32] {
        let g = DomainGrid::new(2, n).unwrap();
        let op = assemble_poisson(&g).unwrap();
        let u = g.sample(|x| (x[0] * x[1]).sin());
        group.bench_with_input(BenchmarkId::new("poisson_2d", n), &u, |b, u| {
            b.iter(|| op.apply(black_box(u)).unwrap())
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let interior = interior_scenario(32);
    group.bench_function("interior_1d_alpha_1e-3", |b| {
        let p = interior.problem(1e-3).unwrap();
        b.iter(|| solve(&p, 1e-8).unwrap())
    });
    let binding = binding_scenario(15);
    group.bench_function("binding_2d_alpha_1e-2", |b| {
        let p = binding.problem(1e-2).unwrap();
        b.iter(|| solve(&p, 1e-8).unwrap())
    });
    group.bench_function("binding_2d_lavrentiev_1e-3", |b| {
        let set = binding
            .set()
            .with_lavrentiev(1e-3, LavrentievSign::Plus)
            .unwrap();
        let p = binding.problem(1e-2).unwrap().with_set(set).unwrap();
        b.iter(|| solve(&p, 1e-8).unwrap())
    });
    group.finish();
}

criterion_group!(benches, assembly, apply, solver);
criterion_main!(benches);

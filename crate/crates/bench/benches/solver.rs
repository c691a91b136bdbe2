use cavsolve_core::auglag::{run_outer, AugLagConfig};
use cavsolve_core::fem::{
    assemble_residual, assemble_stiffness, eval_state, solve_spd, BoundaryData, DeformationField,
    Problem,
};
use cavsolve_core::flow::FlowConfig;
use cavsolve_core::material::benchmark_fluid;
use cavsolve_core::mesh::Mesh;
use cavsolve_core::oracles::initializer_z_eps;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_problem() -> Problem {
    Problem::new(
        benchmark_fluid(),
        BoundaryData::new(1.1, 1.4).unwrap(),
        std::f64::consts::PI * 0.15 * 0.15,
    )
    .unwrap()
}

fn mesh_build(c: &mut Criterion) {
    c.bench_function("mesh_build_32x256", |b| {
        b.iter(|| Mesh::build_annulus(black_box(0.05), 32, 256, 1.1).unwrap())
    });
}

fn energy_sweep(c: &mut Criterion) {
    let mesh = Mesh::build_annulus(0.05, 32, 256, 1.1).unwrap();
    let problem = bench_problem();
    let u = initializer_z_eps(&mesh, &problem.boundary, problem.cavity_volume, 0.5).unwrap();
    c.bench_function("eval_state_32x256", |b| {
        b.iter(|| eval_state(&mesh, black_box(&u), &problem, -2.0, 10.0).unwrap())
    });
}

fn residual_sweep(c: &mut Criterion) {
    let mesh = Mesh::build_annulus(0.05, 32, 256, 1.1).unwrap();
    let problem = bench_problem();
    let u = initializer_z_eps(&mesh, &problem.boundary, problem.cavity_volume, 0.5).unwrap();
    c.bench_function("assemble_residual_32x256", |b| {
        b.iter(|| assemble_residual(&mesh, black_box(&u), &problem, -2.0, 10.0).unwrap())
    });
}

fn stiffness_and_solve(c: &mut Criterion) {
    let mesh = Mesh::build_annulus(0.05, 32, 256, 1.1).unwrap();
    c.bench_function("assemble_stiffness_32x256", |b| {
        b.iter(|| assemble_stiffness(black_box(&mesh)))
    });

    let problem = bench_problem();
    let k = assemble_stiffness(&mesh);
    let u = initializer_z_eps(&mesh, &problem.boundary, problem.cavity_volume, 0.5).unwrap();
    let g = assemble_residual(&mesh, &u, &problem, 0.0, 5.0).unwrap();
    let rhs: Vec<[f64; 2]> = g.iter().map(|v| [-v[0], -v[1]]).collect();
    c.bench_function("cg_solve_cold_32x256", |b| {
        b.iter(|| solve_spd(&k, black_box(&rhs), None, 1e-10, 20_000).unwrap())
    });
}

fn outer_loop_small(c: &mut Criterion) {
    let mesh = Mesh::build_annulus(0.1, 8, 64, 1.1).unwrap();
    let problem = bench_problem();
    let mut group = c.benchmark_group("outer");
    group.sample_size(10);
    group.bench_function("run_outer_8x64", |b| {
        b.iter(|| {
            let u0 = DeformationField::affine(&mesh, &problem.boundary);
            run_outer(
                &mesh,
                &problem,
                u0,
                &AugLagConfig::default(),
                &FlowConfig::default(),
                &mut |_, _| {},
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    mesh_build,
    energy_sweep,
    residual_sweep,
    stiffness_and_solve,
    outer_loop_small
);
criterion_main!(benches);

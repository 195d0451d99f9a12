//! Hot-path benchmarks: characteristic batches, one monotone grid step,
//! interface extraction, extension queries, and tube evaluation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use levext_core::characteristics::{integrate_characteristic, IntegrateOptions};
use levext_core::hj::{dissipation, llf_step};
use levext_core::interface::extract_interface;
use levext_core::velocity::{lipschitz_extend, DomainSample, VelocityField};
use levext_core::{
    solve_tube, AnalyticField, AnalyticSurface, CharState, FieldKind, FieldSpec, Grid,
    LevelSetData, Regularizer, ScalarField, TubeOptions, Vec3,
};

fn bench_grid() -> Grid {
    Grid::new_2d([-2.0, -2.0], 1.0 / 32.0, 129, 129).unwrap()
}

fn rotation_field(grid: &Grid) -> AnalyticField {
    let spec = FieldSpec { kind: FieldKind::RigidRotation { omega: 1.0 }, taper_margin: Some(0.5) };
    AnalyticField::build(&spec, &grid.bounds(), 2, 1.0, 7).unwrap()
}

fn circle() -> AnalyticSurface {
    AnalyticSurface::Sphere { center: Vec3::new(0.5, 0.0, 0.0), radius: 0.6 }
}

fn characteristic_batch(c: &mut Criterion) {
    let grid = bench_grid();
    let v = rotation_field(&grid);
    let surf = circle();
    let seeds: Vec<CharState> = (0..256)
        .map(|i| {
            let ang = i as f64 / 256.0 * std::f64::consts::TAU;
            let x = Vec3::new(0.5 + 0.6 * ang.cos(), 0.6 * ang.sin(), 0.0);
            CharState::interface_seed(x, surf.gradient(&x))
        })
        .collect();
    let mut opts = IntegrateOptions::new(1e-3);
    opts.dim = 2;
    c.bench_function("characteristics, 256 seeds over 100 steps", |b| {
        b.iter(|| {
            for seed in &seeds {
                black_box(integrate_characteristic(&v, *seed, 0.0, 0.1, &opts).unwrap());
            }
        })
    });
}

fn grid_step(c: &mut Criterion) {
    let grid = bench_grid();
    let v = rotation_field(&grid);
    let surf = circle();
    let phi = ScalarField::from_fn(grid, 0.0, |x| surf.value(&x).clamp(-0.25, 0.25));
    let reg = Regularizer::from_grad_floor(1.0).unwrap();
    let diss = dissipation(&phi, &v, &reg);
    c.bench_function("monotone grid step, 129 x 129", |b| {
        b.iter(|| black_box(llf_step(&phi, &v, &reg, 1e-3, &diss).unwrap()))
    });
}

fn interface_extraction(c: &mut Criterion) {
    let grid = bench_grid();
    let surf = circle();
    let phi = ScalarField::from_fn(grid, 0.0, |x| surf.value(&x));
    c.bench_function("interface extraction, 129 x 129", |b| {
        b.iter(|| black_box(extract_interface(&phi).unwrap()))
    });
}

fn extension_query(c: &mut Criterion) {
    let grid = bench_grid();
    let v = rotation_field(&grid);
    let samples = DomainSample::from_grid(&grid);
    let lambda = 1.5 * v.lipschitz();
    let x = Vec3::new(1.2, 0.7, 0.0);
    c.bench_function("extension query over 16641 sample points", |b| {
        b.iter(|| black_box(lipschitz_extend(&v, lambda, &samples, 0.3, &x).unwrap()))
    });
}

fn tube_eval(c: &mut Criterion) {
    let grid = bench_grid();
    let v = rotation_field(&grid);
    let surf = circle();
    let tube = solve_tube(&v, &surf, &TubeOptions::new(&grid, 0.5, 2e-3)).unwrap();
    let x = Vec3::new(1.08, 0.12, 0.0);
    assert!(tube.eval(0.25, &x).is_some(), "probe point must lie inside the tube");
    c.bench_function("tube evaluation", |b| b.iter(|| black_box(tube.eval(0.25, &x))));
}

criterion_group!(
    benches,
    characteristic_batch,
    grid_step,
    interface_extraction,
    extension_query,
    tube_eval
);
criterion_main!(benches);

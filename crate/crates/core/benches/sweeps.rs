//! Sequential versus rayon execution of the main sweeps.

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gyrolattice::bands::{alpha_sweep_diagonal, compute_surfaces};
use gyrolattice::config::linspace;
use gyrolattice::continuum::{assemble_operator, build_scene, SceneConfig};
use gyrolattice::exec::Execution;
use gyrolattice::lattice::LatticeSpec;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn surfaces(c: &mut Criterion) {
    let spec = LatticeSpec::biatomic(1.0, 10.0, 0.5, 0.5);
    let mut group = c.benchmark_group("band_surfaces_biatomic_64");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| compute_surfaces(black_box(&spec), 64, exec).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let spec = LatticeSpec::monatomic(1.0, 0.0);
    let alphas = linspace(0.0, 2.0, 41);
    let kappas = linspace(0.0, PI, 65);
    let mut group = c.benchmark_group("alpha_sweep_41x65");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| alpha_sweep_diagonal(black_box(&spec), &alphas, &kappas, exec).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let scene = build_scene(&SceneConfig::coated(1.5, false)).unwrap();
    let mut group = c.benchmark_group("continuum_assembly_default");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| assemble_operator(black_box(&scene), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, surfaces, sweep, assembly);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use coil_link::lsk::{detune_solve_with, flip_threshold_with, sweep_coupling_with, KRange, MismatchSpec, SweepSpec};
use coil_link::par::Execution;
use coil_link::Preset;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let template = Preset::Flat.scenario();
    let mismatch = MismatchSpec::with_parasitic(12e-12);
    let mut group = c.benchmark_group("sweep_coupling");
    for points in [200usize, 20_000] {
        let spec = SweepSpec {
            points,
            ..SweepSpec::default()
        };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, points), &spec, |b, spec| {
                b.iter(|| sweep_coupling_with(black_box(&template), &mismatch, spec, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn flip(c: &mut Criterion) {
    let template = Preset::Flat.scenario();
    let mismatch = MismatchSpec::with_parasitic(12e-12);
    let range = KRange::new(0.01, 0.2).unwrap();
    let mut group = c.benchmark_group("flip_threshold");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| flip_threshold_with(black_box(&template), &mismatch, range, 2_000, exec).unwrap())
        });
    }
    group.finish();
}

fn detune(c: &mut Criterion) {
    let template = Preset::Flat.scenario();
    let mismatch = MismatchSpec::with_parasitic(12e-12);
    let range = KRange::new(0.01, 0.2).unwrap();
    let mut group = c.benchmark_group("detune_solve");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| detune_solve_with(black_box(&template), &mismatch, range, 0.0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, flip, detune);
criterion_main!(benches);

//! Sequential vs parallel execution of the data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ruloff::offset::{offset_distances, offset_single};
use ruloff::optimizer::pso_minimize;
use ruloff::repro::{reference_cubic, reference_joint, table1_direction, transition_config, TRANSITION_DISTANCE};
use ruloff::subdivide::SubdivisionMode;
use ruloff::surface::{tessellate, Correspondence, RuledPatch};
use ruloff::transition::{quartic_from_params, transition_fitness, HermiteEnds, DEFAULT_SAMPLES};
use ruloff::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn swarm(c: &mut Criterion) {
    let joint = reference_joint();
    let ends = HermiteEnds::from(&joint);
    let fitness = |u: &[f64]| {
        let p: [f64; 7] = u.try_into().unwrap();
        quartic_from_params(&ends, TRANSITION_DISTANCE, &p)
            .map(|q| transition_fitness(&q, &joint.vertex, DEFAULT_SAMPLES))
            .unwrap_or(f64::INFINITY)
    };
    let mut group = c.benchmark_group("pso_20_steps");
    for (name, exec) in MODES {
        let mut cfg = transition_config(3, exec);
        cfg.target = f64::NEG_INFINITY;
        cfg.max_iter = 20;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| pso_minimize(fitness, black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn distances(c: &mut Criterion) {
    let curve = reference_cubic();
    let off = offset_single(&curve, 1.0, table1_direction(), 400.0, SubdivisionMode::Improved).unwrap();
    let mut group = c.benchmark_group("offset_distances_500");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| offset_distances(black_box(&off.curve), &curve, 500, exec).unwrap())
        });
    }
    group.finish();
}

fn mesh(c: &mut Criterion) {
    let curve = reference_cubic();
    let off = offset_single(&curve, 1.0, table1_direction(), 400.0, SubdivisionMode::Improved).unwrap();
    let patch = RuledPatch::new(&curve, &off.curve, Correspondence::ChordLength).unwrap();
    let mut group = c.benchmark_group("tessellate_512x8");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tessellate(black_box(&patch), 512, 8, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, swarm, distances, mesh);
criterion_main!(benches);

//! Force-kernel throughput on the dispatched (rayon under the `parallel`
//! feature) and forced-sequential paths. Build with `--no-default-features`
//! to get the fully sequential engine for comparison.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use timescales_core::glassmd::{
    build_cells_and_neighbors, compute_forces, init_configuration, run_md, Configuration,
    Ensemble, PotentialSpec, RunSpec, SampleSchedule, DEFAULT_SKIN,
};
use timescales_core::parallel::{map_indexed, map_indexed_seq};
use timescales_core::rng::RngStream;

fn prepared(n: usize) -> (Configuration, PotentialSpec) {
    let pot = PotentialSpec::default();
    let mut rng = RngStream::new(17);
    let mut config = init_configuration(n, 0.7, 1.0, 1.0, 1.0, &pot, &mut rng).unwrap();
    let spec = RunSpec {
        ensemble: Ensemble::Langevin { t_target: 1.0, gamma: 1.0 },
        dt: 0.002,
        steps: 200,
        schedule: SampleSchedule::None,
        diag_every: 1000,
        seed: 18,
    };
    run_md(&mut config, &pot, &spec).unwrap();
    (config, pot)
}

/// Whole-evaluation cost through whichever dispatch the build enabled.
fn bench_force_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("force_eval");
    group.warm_up_time(Duration::from_millis(500)).measurement_time(Duration::from_secs(2));
    for n in [400usize, 900, 1600, 6400] {
        let (config, pot) = prepared(n);
        let table = build_cells_and_neighbors(&config, &pot, DEFAULT_SKIN).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| compute_forces(&config, &pot, &table).unwrap())
        });
    }
    group.finish();
}

/// The same pair-style arithmetic pushed through both indexed maps in one
/// binary, so the dispatch overhead is visible even on a single core.
fn bench_indexed_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("indexed_map");
    group.warm_up_time(Duration::from_millis(500)).measurement_time(Duration::from_secs(2));
    for n in [400usize, 6400] {
        let (config, _) = prepared(n);
        let pos = config.pos.clone();
        let l = config.box_len;
        let kernel = move |i: usize| {
            let mut acc = [0.0f64; 2];
            // fixed fan-out: the ~60 indices after i, wrapped
            for k in 1..=60 {
                let j = (i + k) % pos.len();
                let mut dx = pos[i][0] - pos[j][0];
                let mut dy = pos[i][1] - pos[j][1];
                dx -= l * (dx / l).round();
                dy -= l * (dy / l).round();
                let r2 = dx * dx + dy * dy;
                let q9 = (1.0 / r2).powi(9);
                acc[0] += q9 * dx;
                acc[1] += q9 * dy;
            }
            acc
        };
        let k1 = kernel.clone();
        group.bench_with_input(BenchmarkId::new("dispatched", n), &n, |b, _| {
            b.iter(|| map_indexed(n, &k1))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| map_indexed_seq(n, &kernel))
        });
    }
    group.finish();
}

/// End-to-end integration cost per step, neighbor rebuilds included.
fn bench_md_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("md_steps");
    group
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(3))
        .sample_size(10);
    for n in [400usize, 1600] {
        let (config, pot) = prepared(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched(
                || config.clone(),
                |mut state| {
                    let spec = RunSpec {
                        ensemble: Ensemble::Nve,
                        dt: 0.002,
                        steps: 50,
                        schedule: SampleSchedule::None,
                        diag_every: 1000,
                        seed: 0,
                    };
                    run_md(&mut state, &pot, &spec).unwrap()
                },
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_force_eval, bench_indexed_map, bench_md_step);
criterion_main!(benches);

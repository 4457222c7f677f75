//! Parallel vs sequential throughput on the data-parallel hot paths: the
//! one-step row sweep, the mixture-model restarts, the clustering-rate grid,
//! and a small end-to-end replicate batch.
//!
//! Build with the default `parallel` feature to compare both schedules; the
//! parallel entries disappear when the feature is off.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rdpg::chernoff::{chernoff_ratio_grid, EstimatorKind, SpecFamily};
use rdpg::evaluation::gmm_cluster_with_execution;
use rdpg::experiment::{
    run_simulation_with_execution, DimensionChoice, ExperimentConfig, GroundTruth, Metric,
};
use rdpg::model::{sample_rdpg, sbm_assignment, sbm_to_latent, three_block_spec};
use rdpg::one_step::{one_step_update_dense, OneStepConfig};
use rdpg::{ase, Execution};

fn execution_modes() -> Vec<(&'static str, Execution)> {
    let mut modes = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    modes.push(("parallel", Execution::Parallel));
    modes
}

fn bench_one_step(c: &mut Criterion) {
    let spec = three_block_spec(1.0);
    let n = 800;
    let tau = sbm_assignment(&spec, n).unwrap();
    let x0 = sbm_to_latent(&spec, &tau).unwrap();
    let a = sample_rdpg(&x0, 1.0, 1).unwrap();
    let dense = a.to_dense();
    let init = ase(&a, 2).unwrap().estimate;

    let mut group = c.benchmark_group("one_step_update_n800");
    for (name, execution) in execution_modes() {
        let cfg = OneStepConfig {
            execution,
            ..OneStepConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| one_step_update_dense(black_box(&dense), black_box(&init), cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_gmm_restarts(c: &mut Criterion) {
    let spec = three_block_spec(1.0);
    let n = 600;
    let tau = sbm_assignment(&spec, n).unwrap();
    let x0 = sbm_to_latent(&spec, &tau).unwrap();
    let a = sample_rdpg(&x0, 1.0, 2).unwrap();
    let points = ase(&a, 2).unwrap().estimate;

    let mut group = c.benchmark_group("gmm_cluster_n600_k3");
    group.sample_size(10);
    for (name, execution) in execution_modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &ex| {
            b.iter(|| gmm_cluster_with_execution(black_box(&points), 3, 5, ex).unwrap())
        });
    }
    group.finish();
}

fn bench_rate_grid(c: &mut Criterion) {
    let p_values: Vec<f64> = (0..10).map(|i| 0.25 + 0.05 * i as f64).collect();
    let r_values: Vec<f64> = (0..10).map(|j| -0.12 + 0.024 * j as f64).collect();

    let mut group = c.benchmark_group("chernoff_ratio_grid_10x10");
    group.sample_size(10);
    for (name, execution) in execution_modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &ex| {
            b.iter(|| {
                chernoff_ratio_grid(
                    SpecFamily::TwoBlockRankOne,
                    black_box(&p_values),
                    black_box(&r_values),
                    500,
                    EstimatorKind::OseA,
                    EstimatorKind::Ase,
                    ex,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_replicate_batch(c: &mut Criterion) {
    let config = ExperimentConfig {
        input: GroundTruth::Sbm(three_block_spec(1.0)),
        n_values: vec![300],
        replicates: 8,
        seed: 11,
        estimators: vec![EstimatorKind::Ase, EstimatorKind::OseA],
        metrics: vec![Metric::Sse],
        alpha: 0.05,
        d: DimensionChoice::Fixed(2),
        steps: 1,
        clip_epsilon: 1e-6,
        eigen_strategy: Default::default(),
    };

    let mut group = c.benchmark_group("simulate_8_replicates_n300");
    group.sample_size(10);
    for (name, execution) in execution_modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &ex| {
            b.iter(|| run_simulation_with_execution(black_box(&config), ex).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_one_step,
    bench_gmm_restarts,
    bench_rate_grid,
    bench_replicate_batch
);
criterion_main!(benches);

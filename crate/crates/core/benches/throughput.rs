use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tppp::analytic::{log_grid, max_success_gap};
use tppp::metadist::{md_exact_theta_sweep, MdOptions};
use tppp::model::from_db;
use tppp::montecarlo::{estimate_md, SimConfig};
use tppp::{Execution, Model, NetworkParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn simulation(c: &mut Criterion) {
    let params = NetworkParams::default();
    let mut group = c.benchmark_group("empirical_md");
    group.sample_size(10);
    for model in [Model::TpppPlp, Model::PlpPpp] {
        for (name, exec) in MODES {
            let sim = SimConfig {
                exec,
                ..SimConfig::new(2_000, 1)
            };
            group.bench_with_input(BenchmarkId::new(name, model), &sim, |b, sim| {
                b.iter(|| estimate_md(model, black_box(&params), sim).unwrap())
            });
        }
    }
    group.finish();
}

fn exact_sweep(c: &mut Criterion) {
    let params = NetworkParams::default();
    let thetas: Vec<f64> = (-10..=10).step_by(5).map(|db| from_db(db as f64)).collect();
    let mut group = c.benchmark_group("exact_md_theta_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = MdOptions {
            exec,
            ..MdOptions::with_tol(1e-4)
        };
        group.bench_function(name, |b| {
            b.iter(|| md_exact_theta_sweep(Model::TpppPlp, &params, 0.9, black_box(&thetas), &opts).unwrap())
        });
    }
    group.finish();
}

fn gap_scan(c: &mut Criterion) {
    let lp = log_grid(0.01, 1.0, 6);
    let d2 = log_grid(0.1, 100.0, 6);
    let mut group = c.benchmark_group("success_gap_scan");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| max_success_gap(0.204, 4.0, 2, black_box(&lp), &d2, 1e-6, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, simulation, exact_sweep, gap_scan);
criterion_main!(benches);

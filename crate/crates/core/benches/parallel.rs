//! Sequential versus rayon execution of the data-parallel hot loops.
//!
//! With `--no-default-features` both variants run on the calling thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};

use ocdc::datagen::{build_dataset, DatasetConfig, EncodedExample, Process};
use ocdc::experiments::ExperimentConfig;
use ocdc::lowering::{decompose_mvm, execute_schedule};
use ocdc::network::{batch_gradients, DomainMode, Network};
use ocdc::optics::{ChipConfig, ChipState};
use ocdc::rng::SimRng;
use ocdc::tensor::Matrix;
use ocdc::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn schedule(c: &mut Criterion) {
    let chip = ChipState::ideal(&ChipConfig::default(), 0).unwrap();
    let mut r = SimRng::seed_from_u64(0);
    let (k, n) = (512, 128);
    let x: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
    let a: Vec<f64> = (0..k * n).map(|_| r.random_range(-1.0..1.0)).collect();
    let s = decompose_mvm(&x, &Matrix::from_vec(k, n, a).unwrap(), chip.active).unwrap();
    let mut g = c.benchmark_group("execute_schedule_512x128");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| execute_schedule(&s, &chip, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let cfg = ExperimentConfig::compact();
    let data = build_dataset(&DatasetConfig { count: 40, ..cfg.dataset_for(Process::Mf) }, Exec::Parallel).unwrap();
    let net = Network::init(cfg.network_spec(Process::Mf), 0).unwrap();
    let batch: Vec<&EncodedExample> = data.examples.iter().take(20).collect();
    let mut g = c.benchmark_group("batch_gradients_compact_20");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_gradients(&net, &batch, DomainMode::Cbd, cfg.train.lambda_penalty, exec).unwrap())
        });
    }
    g.finish();
}

fn dataset(c: &mut Criterion) {
    let cfg = DatasetConfig { process: Process::Radon, count: 100, size: 16, radon_angles: 30, ..Default::default() };
    let mut g = c.benchmark_group("build_dataset_radon_100");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| b.iter(|| build_dataset(&cfg, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, schedule, gradients, dataset);
criterion_main!(benches);

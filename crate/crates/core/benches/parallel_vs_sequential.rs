//! Sequential versus data-parallel timings of the heavy kernels.
//!
//! Each kernel runs once inside a one-thread pool and once on the default
//! pool. Built with `--no-default-features` the library never touches rayon,
//! so both variants measure the plain loop fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

use linf_core::acceptance::random_ensemble;
use linf_core::concentration::{tail_probability, Side, TailSetup};
use linf_core::constructions::random_homogeneous;
use linf_core::graph::WeightedGraph;
use linf_core::influence::{linf_parameter, InfluenceKind, LinfOptions};
use linf_core::sparsify::{sparsify_with, TreeSampler};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let label = if cfg!(feature = "parallel") { "parallel" } else { "fallback" };
    vec![("sequential", one), (label, all)]
}

fn influence(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu = random_homogeneous(12, 6, 0.6, &mut rng).unwrap();
    let opts = LinfOptions {
        keep_rows: false,
        ..Default::default()
    };
    let mut group = c.benchmark_group("linf_parameter_n12_k6");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| linf_parameter(&mu, InfluenceKind::OneSided, &opts).unwrap()))
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let g = WeightedGraph::complete(7).unwrap();
    let sampler = TreeSampler::new(&g).unwrap();
    let source = sampler.edge_source().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ens = random_ensemble(&mut rng, g.m(), 3).unwrap();
    let setup = TailSetup::with_parameter(&source, &ens, 2.0, false).unwrap();
    let mut group = c.benchmark_group("tree_tail_k7_20k_trials");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| tail_probability(&source, &ens, &setup, 0.5, Side::Max, 20_000, 3).unwrap()))
        });
    }
    group.finish();
}

fn sparsifier(c: &mut Criterion) {
    let g = WeightedGraph::erdos_renyi(40, 0.3, 5).unwrap();
    let sampler = TreeSampler::new(&g).unwrap();
    let mut group = c.benchmark_group("sparsify_gnp40");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| sparsify_with(&sampler, 0.5, 4.0, 9).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, influence, monte_carlo, sparsifier);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use asgd_arena::homogeneous::{ringmaster, RingmasterVariant};
use asgd_arena::par;
use asgd_arena::problem::QuadraticProblem;
use asgd_arena::rng::{self, tag};
use asgd_arena::simcore::{RunOptions, Setup, StopRule};
use asgd_arena::timemodel::{experiment_times, Distribution, Preset};

fn cell(seed: u64) -> f64 {
    let p = QuadraticProblem::new(50, 0.01).unwrap();
    let m = experiment_times(Preset::FixedLinearJitter, 10, seed).unwrap();
    let s = Setup::new(&m, &p, StopRule::iters(2000), RunOptions::seeded(seed));
    ringmaster(&s, 0.2, 5, RingmasterVariant::NoStops).unwrap().final_time
}

fn mc_chunk(chunk: usize) -> f64 {
    let d = Distribution::Exponential { scale: 2.0 };
    (0..1000)
        .map(|t| {
            let mut r = rng::stream(7, tag::MONTE_CARLO, chunk as u64, t);
            (0..10).map(|_| d.sample(&mut r)).sum::<f64>()
        })
        .sum()
}

fn bench(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..16).collect();
    let mut g = c.benchmark_group("sweep_cells");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map(black_box(seeds.clone()), cell)));
    g.bench_function("sequential", |b| b.iter(|| par::sequential_map(black_box(seeds.clone()), cell)));
    g.finish();

    let chunks: Vec<usize> = (0..64).collect();
    let mut g = c.benchmark_group("monte_carlo");
    g.bench_function("parallel", |b| b.iter(|| par::map(black_box(chunks.clone()), mc_chunk)));
    g.bench_function("sequential", |b| b.iter(|| par::sequential_map(black_box(chunks.clone()), mc_chunk)));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

use std::hint::black_box;

use bdris_core::estimator::{embed, gradient, RealInput};
use bdris_core::harness::{run_trial, RunConfig, TrialSeed};
use bdris_core::{
    build_pool, cascade, cayley_transform, draw_channels, greedy_select, random_reactance, BdRisConfig, SceneGeometry,
    WeightMatrix,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cayley(c: &mut Criterion) {
    let mut group = c.benchmark_group("cayley_transform");
    for n0 in [2usize, 4, 8, 16] {
        let cfg = BdRisConfig::new(n0, n0).unwrap();
        let x = random_reactance(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let block = x.blocks()[0].clone();
        group.bench_with_input(BenchmarkId::from_parameter(n0), &block, |b, block| {
            b.iter(|| cayley_transform(black_box(block), 50.0).unwrap())
        });
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_select");
    group.sample_size(10);
    let cfg = BdRisConfig::new(16, 4).unwrap();
    for d in [100usize, 400] {
        let pool = build_pool(&cfg, 20 * d, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &pool, |b, pool| {
            b.iter(|| greedy_select(black_box(pool), d).unwrap())
        });
    }
    group.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient_batch32");
    for (n, n0) in [(4usize, 2usize), (16, 4)] {
        let cfg = BdRisConfig::new(n, n0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scene = SceneGeometry::reference(if n == 4 { (2, 2) } else { (4, 4) });
        let ch = draw_channels(&scene, &cfg, &Default::default(), &mut rng).unwrap();
        let h = cascade(&ch, &cfg).unwrap();
        let pool = build_pool(&cfg, 32, &mut rng).unwrap();
        let inputs: Vec<RealInput> = pool.trps().iter().map(embed).collect();
        let targets: Vec<f64> = pool.trps().iter().map(|v| h.response(v).unwrap().norm_sqr()).collect();
        let w = WeightMatrix::from_rows(vec![[0.1, -0.05]; 2 * cfg.trp_len()]).unwrap();
        group.bench_function(BenchmarkId::from_parameter(format!("N{n}_N0{n0}")), |b| {
            b.iter(|| gradient(black_box(&inputs), black_box(&targets), black_box(&w)).unwrap())
        });
    }
    group.finish();
}

fn desk_trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    group.sample_size(10);
    let mut cfg = RunConfig::desk();
    cfg.selection.trp_count = 200;
    group.bench_function("desk_D200", |b| {
        b.iter(|| run_trial(&cfg, 0, &TrialSeed::from_seed(4)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, cayley, selection, batch_gradient, desk_trial);
criterion_main!(benches);

use std::hint::black_box;

use cournot_lre::dynamics::{
    estimate_stationary, exact_chain_oracle, random_initial_state, step, InitialCondition, SimulationControls,
    DEFAULT_STATE_CAP,
};
use cournot_lre_bench::{four_firms, market, revision};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PERIODS: usize = 10_000;

fn periods(c: &mut Criterion) {
    let m = four_firms();
    let config = revision(4, 0.01, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = random_initial_state(&m, config.memory, &mut rng);
    c.bench_function("step/n4_g91_x10k", |b| {
        b.iter(|| {
            for _ in 0..PERIODS {
                step(&mut state, black_box(&m), &config, &mut rng);
            }
        })
    });
}

fn occupancy(c: &mut Criterion) {
    let m = market(2, 7.5, 6);
    let config = revision(2, 0.05, 3);
    let controls = SimulationControls { periods: 50_000, burn_in: 1_000, replications: 2, seed: 1 };
    let mut group = c.benchmark_group("estimate_stationary");
    group.sample_size(10);
    group.bench_function("n2_g7_50k_x2", |b| {
        b.iter(|| estimate_stationary(black_box(&m), &config, &controls, &InitialCondition::Random).unwrap())
    });
    group.finish();
}

fn exact(c: &mut Criterion) {
    let m = market(2, 7.5, 4);
    let config = revision(2, 0.1, 1);
    c.bench_function("exact_chain_oracle/n2_g5_m1", |b| {
        b.iter(|| exact_chain_oracle(black_box(&m), &config, DEFAULT_STATE_CAP).unwrap())
    });
}

criterion_group!(benches, periods, occupancy, exact);
criterion_main!(benches);

//! Shared fixtures for the benchmarks.

use cournot_lre::dynamics::{NoiseConfig, RevisionConfig};
use cournot_lre::lre::arborescence::Edge;
use cournot_lre::{Cost, CriterionSpec, Demand, OligopolyModel, QuantityGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// p = max(90 - Q, 0), c = q²/2 with `n` firms on `{0, step, …, top·step}`.
pub fn market(n: usize, step: f64, top: usize) -> OligopolyModel {
    OligopolyModel::new(
        n,
        Demand::Linear { intercept: 90.0, slope: 1.0 },
        Cost::Power { coeff: 0.5, exponent: 2.0 },
        QuantityGrid::new(step, top).expect("valid grid"),
    )
    .expect("valid model")
}

pub fn four_firms() -> OligopolyModel {
    market(4, 1.0, 90)
}

pub fn revision(n: usize, epsilon: f64, memory: usize) -> RevisionConfig {
    RevisionConfig::uniform(n, CriterionSpec::ImitateBestMax, NoiseConfig::new(0.5, 0.5, epsilon, 2.0), memory)
}

/// Dense random digraph with integer weights in `1..=5`.
pub fn random_graph(nodes: usize, seed: u64) -> Vec<Edge<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for from in 0..nodes {
        for to in 0..nodes {
            if from != to && rng.gen_bool(0.5) {
                edges.push(Edge { from, to, weight: rng.gen_range(1..=5) });
            }
        }
    }
    edges
}

//! Shared fixtures for the benchmarks: deterministic trees, suites and
//! evolved populations of known shape.

use rand::SeedableRng;

use opengp_core::{run, DepthBin, GenMethod, GpParams, GpRng, Individual, TestSuite};

pub fn suite() -> TestSuite {
    TestSuite::sextic(48, 2024)
}

/// Complete binary tree of the given height: 2^h - 1 nodes.
pub fn full_tree(height: u32) -> opengp_core::ExprTree {
    let mut rng = GpRng::seed_from_u64(height as u64);
    opengp_core::random_tree(GenMethod::Full, height, &mut rng)
}

/// An evolved population after the given number of generations; the
/// incremental evaluator's payoff grows with depth, so benchmarks compare
/// a young population against a deep one.
pub fn evolved_population(seed: u64, generations: u32) -> Vec<Individual> {
    let params = GpParams {
        population_size: 128,
        generations,
        tournament_size: 2,
        crossover_rate: 0.85,
        mutation_rate: 0.1,
        seed,
        ..GpParams::default()
    };
    let (_, pop) = run(&params, &suite(), &DepthBin::default_bins());
    pop.members
}

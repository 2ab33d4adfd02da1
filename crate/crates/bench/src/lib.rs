//! Shared setup for the benchmarks.

use fairdiv_core::generate::Generator;
use fairdiv_core::{run, Algorithm, ExactOracle, Instance, TiePolicy};

/// A uniform instance, made identical when the algorithm needs it.
pub fn instance(algorithm: Algorithm, n: usize, m: usize) -> Instance {
    let g = if algorithm.assumes_identical() { Generator::Identical } else { Generator::Uniform };
    g.instance(n, m, 7)
}

/// Runs `algorithm` against the exact oracle and returns the query count.
pub fn queries(inst: &Instance, algorithm: Algorithm) -> usize {
    let mut o = ExactOracle::new(inst, TiePolicy::FirstArgument).unwrap();
    run(&mut o, algorithm, inst.n, inst.m).unwrap();
    fairdiv_core::ComparisonOracle::log(&o).total()
}

//! Seeded random instances.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FairDivError, Result};
use crate::types::{Instance, Valuation};

/// Item values are drawn from `0..VALUE_BOUND`.
pub const VALUE_BOUND: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Independent uniform values per agent.
    #[default]
    Uniform,
    /// Uniform, except one item per agent worth as much as all the others
    /// together.
    Spiky,
    /// One uniform row shared by every agent.
    Identical,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Uniform => "uniform",
            Generator::Spiky => "spiky",
            Generator::Identical => "identical",
        }
    }

    pub fn instance(self, n: usize, m: usize, seed: u64) -> Instance {
        match self {
            Generator::Uniform => uniform(n, m, seed),
            Generator::Spiky => spiky(n, m, seed),
            Generator::Identical => identical(n, m, seed),
        }
    }
}

impl FromStr for Generator {
    type Err = FairDivError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Generator::Uniform),
            "spiky" => Ok(Generator::Spiky),
            "identical" => Ok(Generator::Identical),
            _ => Err(FairDivError::Parse(format!("unknown generator `{s}`"))),
        }
    }
}

fn row(rng: &mut ChaCha8Rng, m: usize) -> Vec<u64> {
    (0..m).map(|_| rng.random_range(0..VALUE_BOUND)).collect()
}

fn build(rows: Vec<Vec<u64>>, m: usize) -> Instance {
    let n = rows.len();
    let vals = rows.into_iter().map(Valuation::from_integers).collect();
    Instance::new(n, m, Some(vals)).expect("generated rows have m entries")
}

pub fn uniform(n: usize, m: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| row(&mut rng, m)).collect();
    build(rows, m)
}

pub fn spiky(n: usize, m: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut r = row(&mut rng, m);
            if m > 0 {
                let spike = rng.random_range(0..m);
                r[spike] = 0;
                r[spike] = r.iter().sum();
            }
            r
        })
        .collect();
    build(rows, m)
}

pub fn identical(n: usize, m: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = row(&mut rng, m);
    build(vec![r; n], m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AgentId, ItemId, Rational};

    #[test]
    fn seeds_are_reproducible() {
        for g in [Generator::Uniform, Generator::Spiky, Generator::Identical] {
            assert_eq!(g.instance(3, 9, 7), g.instance(3, 9, 7));
            assert_ne!(g.instance(3, 9, 7), g.instance(3, 9, 8));
            assert_eq!(g.name().parse::<Generator>().unwrap(), g);
        }
    }

    #[test]
    fn spiky_items_match_the_rest() {
        let inst = spiky(4, 10, 3);
        for a in inst.agents() {
            let v = inst.valuation(a).unwrap();
            let total = v.total();
            let max = (0..10).map(|i| v.item(ItemId(i)).unwrap()).max().unwrap();
            assert_eq!(max * 2, total);
        }
    }

    #[test]
    fn values_stay_in_range() {
        let inst = uniform(2, 50, 1);
        let bound = Rational::from_integer(VALUE_BOUND as u128);
        assert!(inst.valuation(AgentId(1)).unwrap().values().iter().all(|x| *x < bound));
        let same = identical(3, 5, 2);
        assert_eq!(same.valuation(AgentId(0)).unwrap(), same.valuation(AgentId(2)).unwrap());
        assert_eq!(uniform(2, 0, 0).m, 0);
    }
}

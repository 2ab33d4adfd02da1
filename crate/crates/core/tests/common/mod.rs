#![allow(dead_code)]

use fairdiv_core::generate::Generator;
use fairdiv_core::mms::{first_type_guarantee_check, second_type_partition_witness, MmsOutcome};
use fairdiv_core::verify::{mms_value, prop1_holds, DEFAULT_MMS_BUDGET};
use fairdiv_core::{bundle_value, Bundle, Instance, Rational, TiePolicy, Valuation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Instance families used across the suites. The last two produce many
/// equal-valued bundles, which is where tie handling matters.
#[derive(Clone, Copy, Debug)]
pub enum Family {
    Uniform,
    Spiky,
    Coarse,
    Sparse,
}

pub const FAMILIES: [Family; 4] = [Family::Uniform, Family::Spiky, Family::Coarse, Family::Sparse];

pub fn instance(family: Family, n: usize, m: usize, seed: u64) -> Instance {
    match family {
        Family::Uniform => Generator::Uniform.instance(n, m, seed),
        Family::Spiky => Generator::Spiky.instance(n, m, seed),
        Family::Coarse => small_values(n, m, seed, |rng| rng.random_range(0..4)),
        Family::Sparse => small_values(n, m, seed, |rng| {
            if rng.random_bool(0.15) {
                1000
            } else {
                rng.random_range(0..3)
            }
        }),
    }
}

fn small_values(n: usize, m: usize, seed: u64, mut draw: impl FnMut(&mut ChaCha8Rng) -> u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..n)
        .map(|_| Valuation::from_integers((0..m).map(|_| draw(&mut rng)).collect::<Vec<_>>()))
        .collect();
    Instance::new(n, m, Some(vals)).unwrap()
}

/// The same agent's row for everyone.
pub fn identical(inst: &Instance, n: usize) -> Instance {
    let v = inst.valuations().unwrap()[0].clone();
    Instance::new(n, inst.m, Some(vec![v; n])).unwrap()
}

pub fn policies(seed: u64) -> [TiePolicy; 3] {
    [TiePolicy::FirstArgument, TiePolicy::SecondArgument, TiePolicy::Scripted { seed }]
}

pub fn rows(inst: &Instance) -> Vec<Vec<String>> {
    inst.valuations()
        .unwrap()
        .iter()
        .map(|v| v.values().iter().map(|x| x.to_string()).collect())
        .collect()
}

fn r(x: usize) -> Rational {
    Rational::from_integer(x as u128)
}

pub fn mms(v: &Valuation, items: &Bundle, n: usize) -> Rational {
    mms_value(v, items, n, DEFAULT_MMS_BUDGET).unwrap()
}

/// Every per-round property of the run, checked with exact values.
pub fn check_rounds(inst: &Instance, out: &MmsOutcome) -> Result<(), String> {
    let n = inst.n;
    if out.rounds.len() > n * n || out.first_type.len() > n {
        return Err(format!("{} rounds, {} restarts", out.rounds.len(), out.first_type.len()));
    }
    for round in &out.rounds {
        let (big_n, big_m) = (round.invocation_agents.len(), &round.invocation_items);
        let (q, p) = (round.agents.len(), &round.pool);
        for &i in &round.agents {
            let v = inst.valuation(i).unwrap();
            let (up, um) = (bundle_value(v, p).unwrap(), bundle_value(v, big_m).unwrap());
            if up * r(big_n) < um * r(q) {
                return Err(format!("round {}: potential drops for {i}", round.index));
            }
            if q >= 2 {
                for o in p.iter() {
                    let lhs = bundle_value(v, &p.without(o)).unwrap() * r(big_n - 1);
                    let rhs = bundle_value(v, &big_m.without(o)).unwrap() * r(q - 1);
                    if lhs < rhs {
                        return Err(format!("round {}: removal inequality fails for {i}, {o}", round.index));
                    }
                }
            }
        }
        if round.bundles.is_empty() {
            continue;
        }
        let vc = inst.valuation(round.cutter).unwrap();
        let half_cutter = mms(vc, p, q) / r(2);
        if round.bundles.iter().any(|c| bundle_value(vc, c).unwrap() < half_cutter) {
            return Err(format!("round {}: a cut bundle is below half the cutter's MMS", round.index));
        }
        let Some(graph) = &round.graph else { continue };
        for (pos, &i) in round.agents.iter().enumerate() {
            let v = inst.valuation(i).unwrap();
            let half = mms(v, p, q) / r(2);
            for (j, c) in round.bundles.iter().enumerate() {
                if !graph.has_edge(pos, j) {
                    continue;
                }
                if !prop1_holds(v, p, q, c).unwrap() || bundle_value(v, c).unwrap() < half {
                    return Err(format!("round {}: edge {i} -> {j} is unsound", round.index));
                }
            }
        }
        for a in round.unmatched() {
            let v = inst.valuation(a).unwrap();
            let parts = second_type_partition_witness(v, round, a).map_err(|e| e.to_string())?;
            if parts.len() != round.unmatched().len() {
                return Err(format!("round {}: witness has {} parts", round.index, parts.len()));
            }
            let mut rest = p.clone();
            for (_, j) in round.assigned() {
                rest.difference_with(&round.bundles[j]);
                let matched = bundle_value(v, &round.bundles[j]).unwrap();
                if parts.iter().any(|part| bundle_value(v, part).unwrap() < matched) {
                    return Err(format!("round {}: witness part for {a} below a matched bundle", round.index));
                }
            }
            let covered = parts.iter().fold(Bundle::new(), |acc, part| acc.union(part));
            if covered != rest {
                return Err(format!("round {}: witness does not cover the rest", round.index));
            }
        }
    }
    for ev in &out.first_type {
        let round = &out.rounds[ev.round];
        let v = inst.valuation(ev.agent).unwrap();
        let single = Bundle::singleton(ev.item);
        let local = (&round.invocation_items, round.invocation_agents.len());
        // measured against the invocation the restart happened in; earlier
        // singletons may have taken everything the agent cares about
        if !first_type_guarantee_check(v, local.0, local.1, &single, ev.witness).unwrap() {
            return Err(format!("first-type singleton {} for {} too small", ev.item, ev.agent));
        }
        // the reduced instance never lowers anyone's MMS
        for &i in &round.invocation_agents {
            if i == ev.agent {
                continue;
            }
            let vi = inst.valuation(i).unwrap();
            if mms(vi, &local.0.without(ev.item), local.1 - 1) < mms(vi, local.0, local.1) {
                return Err(format!("MMS of {i} drops after removing {}", ev.item));
            }
        }
    }
    Ok(())
}

mod common;

use common::{identical, instance, policies, rows, Family, FAMILIES};
use fairdiv_core::ef1::{cut_and_choose, ef1_envy_graph, ef1_identical, ef1_three_agents, Ef1Trace};
use fairdiv_core::verify::{is_ef1, is_ef1_partial};
use fairdiv_core::{bundle_value, AgentId, Allocation, Bundle, ComparisonOracle, ExactOracle, Instance, Rational, TiePolicy, Valuation};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    (0..FAMILIES.len()).prop_map(|i| FAMILIES[i])
}

fn value(v: &Valuation, b: &Bundle) -> Rational {
    bundle_value(v, b).unwrap()
}

/// `u(b) ≥ u(a_n)` and dropping the single most valuable item of `b` brings
/// it to at most `u(a_n)`.
fn sandwiched(v: &Valuation, b: &Bundle, a_n: &Bundle) -> bool {
    let target = value(v, a_n);
    let best = b.iter().map(|g| v.item(g).unwrap()).max().unwrap_or_default();
    value(v, b) >= target && value(v, b) - best <= target
}

fn check_trace(v: &Valuation, items: &Bundle, t: &Ef1Trace) -> std::result::Result<(), String> {
    let line: Bundle = t.line.iter().collect();
    if line.len() != t.line.len() || !line.is_disjoint(&t.a_n) || line.union(&t.a_n) != *items {
        return Err("snapshot does not partition the items".into());
    }
    if !t.leftovers.iter().all(|&g| line.contains(g)) {
        return Err("leftover outside the line".into());
    }
    if t.leftovers.windows(2).any(|w| v.item(w[0]).unwrap() > v.item(w[1]).unwrap()) {
        return Err("leftovers not ascending".into());
    }
    for (i, c) in t.after_knife.iter().enumerate() {
        // the knife cuts contiguous runs of the line
        let pos: Vec<usize> = t.line.iter().enumerate().filter(|(_, g)| c.contains(**g)).map(|(p, _)| p).collect();
        if pos.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(format!("C_{i} is not contiguous"));
        }
        let target = value(v, &t.a_n);
        if value(v, c) < target {
            return Err(format!("C_{i} below A_n"));
        }
        if let Some(&last) = pos.last() {
            if value(v, &c.without(t.line[last])) > target {
                return Err(format!("C_{i} minus its rightmost item still above A_n"));
            }
        }
    }
    for (k, d) in t.after_exchange.iter().enumerate() {
        if !sandwiched(v, d, &t.a_n) {
            return Err(format!("D_{k} not sandwiched"));
        }
    }
    let left: Bundle = t.leftovers.iter().collect();
    let stray: Bundle = t.remainder.iter().filter(|g| !left.contains(**g)).collect();
    if value(v, &stray) != Rational::default() {
        return Err("remainder outside the leftovers has value".into());
    }
    if value(v, &t.zero_part) != Rational::default() {
        return Err("zero part has value".into());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn two_agents_cut_and_choose(f in family(), m in 0usize..30, seed: u64) {
        let inst = instance(f, 2, m, seed);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let (a, b) = cut_and_choose(&mut o, &inst.items()).unwrap();
            let alloc = Allocation::from_bundles(vec![a.clone(), b.clone()], m).unwrap();
            prop_assert!(is_ef1(&inst, &alloc).unwrap(), "{tp:?} {:?}", rows(&inst));
            // the chooser does not envy at all
            let v1 = &inst.valuations().unwrap()[1];
            prop_assert!(value(v1, &b) >= value(v1, &a));
        }
    }

    #[test]
    fn identical_agents_ef1_with_trace(f in family(), n in 1usize..7, m in 0usize..30, seed: u64) {
        let inst = identical(&instance(f, 1, m, seed), n);
        let v = inst.valuations().unwrap()[0].clone();
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let out = ef1_identical(&mut o, AgentId(0), n, &inst.items()).unwrap();
            let alloc = Allocation::from_bundles(out.bundles.clone(), m).unwrap();
            prop_assert!(is_ef1(&inst, &alloc).unwrap(), "{tp:?} {:?}", rows(&inst));
            prop_assert_eq!(out.trace.is_some(), n >= 2 && m >= n);
            if let Some(t) = &out.trace {
                prop_assert_eq!(t.after_knife.len(), n - 1);
                prop_assert_eq!(t.leftovers.len(), n - 1);
                if let Err(e) = check_trace(&v, &inst.items(), t) {
                    prop_assert!(false, "{} under {:?} on {:?}", e, tp, rows(&inst));
                }
            }
        }
    }

    #[test]
    fn three_agents_ef1(f in family(), m in 0usize..30, seed: u64) {
        let inst = instance(f, 3, m, seed);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let out = ef1_three_agents(&mut o, &inst.items()).unwrap();
            let alloc = Allocation::from_bundles(out.bundles, m).unwrap();
            prop_assert!(is_ef1(&inst, &alloc).unwrap(), "{tp:?} {:?} {:?}", out.case, rows(&inst));
        }
    }

    #[test]
    fn envy_graph_keeps_ef1_after_every_item(f in family(), n in 1usize..5, m in 0usize..16, seed: u64) {
        let inst = instance(f, n, m, seed);
        let vals = inst.valuations().unwrap();
        for tp in policies(seed) {
            for k in 0..=m {
                let prefix = Bundle::full(k);
                let mut o = ExactOracle::new(&inst, tp).unwrap();
                let bundles = ef1_envy_graph(&mut o, n, &prefix).unwrap();
                prop_assert!(is_ef1_partial(vals, &bundles).unwrap(), "{tp:?} after {k} items");
            }
        }
    }

    #[test]
    fn query_budgets(exp in 1u32..13, seed: u64, spiky: bool) {
        let m = 1usize << exp;
        let f = if spiky { Family::Spiky } else { Family::Uniform };
        let l = (m as f64).log2() + 1.0;

        let inst = instance(f, 2, m, seed);
        let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        cut_and_choose(&mut o, &inst.items()).unwrap();
        prop_assert!(o.log().total() as f64 <= 2.0 * l);

        let inst = instance(f, 3, m, seed);
        let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        ef1_three_agents(&mut o, &inst.items()).unwrap();
        prop_assert!(o.log().total() as f64 <= 16.0 * l);

        for n in 2..6 {
            let same = identical(&instance(f, 1, m, seed), n);
            let mut o = ExactOracle::new(&same, TiePolicy::FirstArgument).unwrap();
            ef1_identical(&mut o, AgentId(0), n, &same.items()).unwrap();
            prop_assert!(o.log().total() as f64 <= 2.0 * (n * n) as f64 * l);
        }
    }
}

#[test]
fn contested_bundle_reaches_later_steps() {
    // agents 2 and 3 both want everything agent 1 would give the first part
    let inst = Instance::with_valuations(vec![
        Valuation::from_integers([1; 9]),
        Valuation::from_integers([5, 5, 5, 0, 0, 0, 0, 0, 0]),
        Valuation::from_integers([5, 5, 5, 0, 0, 0, 0, 0, 1]),
    ])
    .unwrap();
    let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
    let out = ef1_three_agents(&mut o, &inst.items()).unwrap();
    assert_ne!(out.case, fairdiv_core::ef1::ThreeAgentCase::DistinctFavourites);
    let alloc = Allocation::from_bundles(out.bundles, 9).unwrap();
    assert!(is_ef1(&inst, &alloc).unwrap());
}

#[test]
fn zero_valued_items_end_up_somewhere() {
    let inst = identical(
        &Instance::with_valuations(vec![Valuation::from_integers([0, 4, 0, 0, 3, 0, 2, 0])]).unwrap(),
        3,
    );
    for tp in policies(11) {
        let mut o = ExactOracle::new(&inst, tp).unwrap();
        let out = ef1_identical(&mut o, AgentId(0), 3, &inst.items()).unwrap();
        let alloc = Allocation::from_bundles(out.bundles, 8).unwrap();
        assert!(alloc.is_complete());
        assert!(is_ef1(&inst, &alloc).unwrap());
    }
}

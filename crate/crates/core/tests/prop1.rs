mod common;

use common::{identical, instance, policies, Family, FAMILIES};
use fairdiv_core::prop1::{
    item_partition, prop1_general, prop1_identical, prop1_prop_subroutine, prop1_prop_subroutine_alt, Verdict,
};
use fairdiv_core::verify::{is_prop1, prop1_holds, prop_holds};
use fairdiv_core::{bundle_value, AgentId, Allocation, Bundle, ComparisonOracle, ExactOracle, ItemId, Rational, TiePolicy};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    (0..FAMILIES.len()).prop_map(|i| FAMILIES[i])
}

fn log_scale(m: usize) -> f64 {
    (m.max(1) as f64).log2() + 1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identical_agents_get_prop1(f in family(), n in 1usize..6, m in 0usize..24, seed: u64) {
        let inst = identical(&instance(f, 1, m, seed), n);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let bundles = prop1_identical(&mut o, AgentId(0), n, &inst.items()).unwrap();
            let alloc = Allocation::from_bundles(bundles, m).unwrap();
            prop_assert!(is_prop1(&inst, &alloc).unwrap(), "{tp:?} {alloc:?}");
        }
    }

    #[test]
    fn general_agents_get_prop1(f in family(), n in 1usize..6, m in 0usize..24, seed: u64) {
        let inst = instance(f, n, m, seed);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let out = prop1_general(&mut o, n, m).unwrap();
            prop_assert!(is_prop1(&inst, &out.allocation).unwrap(), "{tp:?} {:?}", out.allocation);
            prop_assert!(out.rounds.len() <= n);
        }
    }

    #[test]
    fn item_partition_invariants(f in family(), n in 1usize..7, m in 0usize..40, seed: u64) {
        let inst = instance(f, 1, m, seed);
        let v = &inst.valuations().unwrap()[0];
        let items = inst.items();
        let total = bundle_value(v, &items).unwrap();
        let share = total / Rational::from_integer(n as u128);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let part = item_partition(&mut o, AgentId(0), n, &items).unwrap();
            if m >= n {
                prop_assert_eq!(part.pool.len(), n - 1);
            } else {
                prop_assert_eq!(part.pool.len(), m);
            }
            let mut seen = part.pool.clone();
            for b in &part.bundles {
                prop_assert!(bundle_value(v, b).unwrap() <= share);
                prop_assert!(seen.is_disjoint(b));
                seen.union_with(b);
            }
            prop_assert_eq!(seen, items.clone());
            // the bound holds at every intermediate step, not just at the end
            for round in &part.history {
                prop_assert!(bundle_value(v, &round.tentative[round.kept]).unwrap() <= share);
            }
        }
    }

    #[test]
    fn subroutine_verdicts_are_sound(
        f in family(),
        n in 1usize..6,
        m in 1usize..20,
        seed: u64,
        mask: u32,
    ) {
        let inst = instance(f, 1, m, seed);
        let v = &inst.valuations().unwrap()[0];
        let items = inst.items();
        let b: Bundle = (0..m).filter(|i| mask >> i & 1 == 1).map(ItemId).collect();
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let main = prop1_prop_subroutine(&mut o, AgentId(0), n, &items, &b).unwrap().verdict;
            let alt = prop1_prop_subroutine_alt(&mut o, AgentId(0), n, &items, &b).unwrap();
            for verdict in [main, alt] {
                match verdict {
                    Verdict::Yes => prop_assert!(prop1_holds(v, &items, n, &b).unwrap(), "{tp:?} {b:?}"),
                    Verdict::No => {
                        let total = v.scaled_value(&items).unwrap();
                        let own = v.scaled_value(&b).unwrap() * n as u128;
                        prop_assert!(own <= total, "{tp:?} {b:?}");
                        if tp == TiePolicy::FirstArgument {
                            prop_assert!(!prop_holds(v, &items, n, &b).unwrap(), "not strict {b:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn query_budgets(n in 2usize..5, exp in 1u32..12, seed: u64, spiky: bool) {
        let m = 1usize << exp;
        let f = if spiky { Family::Spiky } else { Family::Uniform };
        let inst = instance(f, n, m, seed);
        let l = log_scale(m);
        let nf = n as f64;

        let same = identical(&inst, n);
        let mut o = ExactOracle::new(&same, TiePolicy::FirstArgument).unwrap();
        prop1_identical(&mut o, AgentId(0), n, &same.items()).unwrap();
        prop_assert!(o.log().total() as f64 <= 2.0 * nf * nf * l);

        let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        let b: Bundle = (0..m / (2 * n)).map(ItemId).collect();
        prop1_prop_subroutine(&mut o, AgentId(0), n, &inst.items(), &b).unwrap();
        prop_assert!(o.log().total() as f64 <= 2.0 * nf * l);

        let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        prop1_general(&mut o, n, m).unwrap();
        prop_assert!(o.log().total() as f64 <= nf.powi(4) * l);
    }
}

#[test]
fn verdict_bands_overlap() {
    // u = (3, 1, 1, 1) with n = 2: {g0} is worth exactly half, so both
    // answers are sound and the two procedures may disagree.
    let inst = fairdiv_core::Instance::with_valuations(vec![fairdiv_core::Valuation::from_integers([3, 1, 1, 1])])
        .unwrap();
    let v = &inst.valuations().unwrap()[0];
    let b = Bundle::singleton(ItemId(0));
    assert!(prop1_holds(v, &inst.items(), 2, &b).unwrap());
    assert!(prop_holds(v, &inst.items(), 2, &b).unwrap());
    let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
    let main = prop1_prop_subroutine(&mut o, AgentId(0), 2, &inst.items(), &b).unwrap();
    assert_eq!(main.verdict, Verdict::Yes);
    assert!(o.log().total() > 0);
}

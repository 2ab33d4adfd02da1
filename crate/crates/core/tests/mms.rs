mod common;

use common::{check_rounds, instance, mms, policies, rows, Family, FAMILIES};
use fairdiv_core::mms::{main_algorithm, BundleTag, FirstTypeSource};
use fairdiv_core::verify::{is_alpha_mms, is_prop1};
use fairdiv_core::{ExactOracle, Rational, TiePolicy};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    (0..FAMILIES.len()).prop_map(|i| FAMILIES[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prop1_and_half_mms_with_round_invariants(f in family(), n in 1usize..5, m in 0usize..11, seed: u64) {
        let m = if n == 4 { m.min(8) } else { m };
        let inst = instance(f, n, m, seed);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let out = main_algorithm(&mut o, n, m).unwrap();
            prop_assert!(is_prop1(&inst, &out.allocation).unwrap(), "{tp:?} {:?}", rows(&inst));
            prop_assert!(is_alpha_mms(&inst, &out.allocation, Rational::new(1, 2)).unwrap(), "{tp:?} {:?}", rows(&inst));
            if let Err(e) = check_rounds(&inst, &out) {
                prop_assert!(false, "{} under {:?} on {:?}", e, tp, rows(&inst));
            }
            let singles = out.kinds.iter().filter(|k| k.tag == BundleTag::FirstType).count();
            prop_assert_eq!(singles, out.first_type.len());
        }
    }

    #[test]
    fn prop1_at_larger_scale(f in family(), n in 1usize..6, m in 0usize..60, seed: u64) {
        let inst = instance(f, n, m, seed);
        for tp in policies(seed) {
            let mut o = ExactOracle::new(&inst, tp).unwrap();
            let out = main_algorithm(&mut o, n, m).unwrap();
            prop_assert!(is_prop1(&inst, &out.allocation).unwrap(), "{tp:?} {:?}", rows(&inst));
            prop_assert!(out.rounds.len() <= n * n);
        }
    }

    #[test]
    fn removing_an_agent_and_an_item_keeps_mms(f in family(), n in 2usize..4, m in 1usize..9, seed: u64) {
        let inst = instance(f, n, m, seed);
        let items = inst.items();
        for v in inst.valuations().unwrap() {
            let before = mms(v, &items, n);
            for g in items.iter() {
                prop_assert!(mms(v, &items.without(g), n - 1) >= before);
            }
        }
    }
}

#[test]
fn restarts_are_exercised() {
    // a sweep of sparse instances must hit both kinds of restart, or the
    // invariants above say little about them
    let (mut cutter, mut split) = (0, 0);
    for seed in 0..400 {
        let inst = instance(Family::Sparse, 3, 9, seed);
        let mut o = ExactOracle::new(&inst, TiePolicy::FirstArgument).unwrap();
        let out = main_algorithm(&mut o, 3, 9).unwrap();
        check_rounds(&inst, &out).unwrap();
        for ev in &out.first_type {
            match ev.source {
                FirstTypeSource::Cutter => cutter += 1,
                FirstTypeSource::Subroutine { .. } => split += 1,
            }
        }
    }
    assert!(cutter > 0 && split > 0, "cutter {cutter}, subroutine {split}");
}

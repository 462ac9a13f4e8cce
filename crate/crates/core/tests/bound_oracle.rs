mod common;

use common::{enumerate, random_instance, Oracle};
use proptest::prelude::*;
use rangebound::bound::{bound_region, BoundOptions, ResultRange, Status};
use rangebound::query::Aggregate;

const AGGS: [Aggregate; 5] = [Aggregate::Sum, Aggregate::Count, Aggregate::Avg, Aggregate::Min, Aggregate::Max];

pub fn agrees(r: &ResultRange, o: Oracle, agg: Aggregate) -> Result<(), String> {
    match (r.status, o) {
        (Status::Exact, Oracle::Range(lo, hi)) => {
            let tol = if agg == Aggregate::Avg { 1e-6 * 8.0 } else { 1e-9 };
            let (l, u) = (r.lower.unwrap(), r.upper.unwrap());
            if (l - lo).abs() <= tol && (u - hi).abs() <= tol {
                Ok(())
            } else {
                Err(format!("{agg}: engine [{l}, {u}] vs oracle [{lo}, {hi}]"))
            }
        }
        (Status::NotClosed, Oracle::NotClosed) | (Status::InfeasibleConstraints, Oracle::Infeasible) | (Status::NoRows, Oracle::NoRows) => {
            Ok(())
        }
        (s, o) => Err(format!("{agg}: engine {s:?} {:?}..{:?} vs oracle {o:?}", r.lower, r.upper)),
    }
}

pub fn check_instance(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let schema = inst.set.schema();
    let region = inst.predicate.to_region(schema).unwrap();
    for agg in AGGS {
        let attr = (agg != Aggregate::Count).then_some(1);
        let r = bound_region(agg, attr, Some(&inst.predicate), &inst.set, &inst.existing, &BoundOptions::default()).unwrap();
        let o = enumerate(&inst.set, &region, 1, agg, &inst.existing);
        agrees(&r, o, agg).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(())
}

#[test]
fn two_hundred_seeded_instances_match_enumeration() {
    for seed in 0..200 {
        check_instance(seed).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_instances_match_enumeration(seed in 1000u64..u64::MAX) {
        check_instance(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn avg_lies_between_min_and_max(seed in 0u64..100_000) {
        let inst = random_instance(seed);
        let run = |agg| bound_region(agg, Some(1), Some(&inst.predicate), &inst.set, &inst.existing, &BoundOptions::default()).unwrap();
        let (avg, min, max) = (run(Aggregate::Avg), run(Aggregate::Min), run(Aggregate::Max));
        if avg.status == Status::Exact {
            prop_assert!(avg.lower.unwrap() >= min.lower.unwrap() - 1e-6);
            prop_assert!(avg.upper.unwrap() <= max.upper.unwrap() + 1e-6);
        }
    }

    #[test]
    fn widening_a_window_never_narrows_the_range(seed in 0u64..100_000, j in 0usize..4) {
        let inst = random_instance(seed);
        let j = j % inst.set.len();
        let wider = inst.set.map_constraints(|pc| {
            let mut pc = pc.clone();
            if pc.id == inst.set.get(j).id {
                pc.kappa.kl = 0;
                pc.kappa.ku += 2;
            }
            pc
        }).unwrap();
        for agg in [Aggregate::Sum, Aggregate::Count] {
            let attr = (agg != Aggregate::Count).then_some(1);
            let a = bound_region(agg, attr, Some(&inst.predicate), &inst.set, &inst.existing, &BoundOptions::default()).unwrap();
            let b = bound_region(agg, attr, Some(&inst.predicate), &wider, &inst.existing, &BoundOptions::default()).unwrap();
            if a.status == Status::Exact {
                prop_assert_eq!(b.status, Status::Exact);
                prop_assert!(b.upper.unwrap() >= a.upper.unwrap() - 1e-9);
                prop_assert!(b.lower.unwrap() <= a.lower.unwrap() + 1e-9);
            }
        }
    }
}

mod common;

use std::collections::BTreeSet;

use common::{load_set, random_instance};
use proptest::prelude::*;
use rangebound::bound::{bound_region, BoundOptions, Status};
use rangebound::decompose::{decompose, enumerate_naive, DecomposeOptions, Decomposition, VisitOrder};
use rangebound::par::Parallelism;
use rangebound::pc::PcSet;
use rangebound::predicate::{endpoint_grid, Interval, Predicate, Region};
use rangebound::query::Aggregate;

/// Covering sets realised by some grid point of `clip`.
fn grid_coverings(set: &PcSet, clip: &Region) -> BTreeSet<Vec<usize>> {
    let mut boxes = vec![clip.clone()];
    boxes.extend((0..set.len()).map(|j| set.region(j).clone()));
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in endpoint_grid(&boxes) {
        points = points.iter().flat_map(|p| axis.representatives().into_iter().map(move |x| [p.clone(), vec![x]].concat())).collect();
    }
    points
        .iter()
        .filter(|p| clip.contains_encoded(p))
        .map(|p| (0..set.len()).filter(|&j| set.region(j).contains_encoded(p)).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect()
}

fn assert_disjoint(d: &Decomposition) {
    let pieces: Vec<&Region> = d.all_cells().flat_map(|c| &c.pieces).collect();
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            assert!(!a.intersects(b), "{a:?} overlaps {b:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cells_match_grid_coverings(seed in 0u64..1_000_000) {
        let inst = random_instance(seed);
        let clip = inst.predicate.to_region(inst.set.schema()).unwrap();
        let d = decompose(&inst.set, Some(&inst.predicate), &DecomposeOptions::default()).unwrap();
        let got: BTreeSet<Vec<usize>> = d.cells.iter().map(|c| c.covering.clone()).collect();
        prop_assert_eq!(got.len(), d.cells.len());
        prop_assert_eq!(&got, &grid_coverings(&inst.set, &clip));
        let naive: BTreeSet<Vec<usize>> = enumerate_naive(&inst.set, Some(&inst.predicate)).unwrap().into_iter().collect();
        prop_assert_eq!(got, naive);
        assert_disjoint(&d);
    }

    #[test]
    fn pieces_respect_the_covering_constraints(seed in 0u64..1_000_000) {
        let inst = random_instance(seed);
        let d = decompose(&inst.set, Some(&inst.predicate), &DecomposeOptions::default()).unwrap();
        for c in d.all_cells() {
            for p in &c.pieces {
                for j in 0..inst.set.len() {
                    let inside = c.covering.contains(&j);
                    if inside {
                        prop_assert!(p.is_within(inst.set.region(j)) && p.is_within(inst.set.nu_region(j)));
                    } else {
                        prop_assert!(!p.intersects(inst.set.region(j)));
                    }
                }
            }
        }
    }

    #[test]
    fn parallel_equals_sequential(seed in 0u64..1_000_000, selective in any::<bool>()) {
        let inst = random_instance(seed);
        let order = if selective { VisitOrder::Selectivity } else { VisitOrder::ListOrder };
        let run = |parallelism| decompose(&inst.set, Some(&inst.predicate), &DecomposeOptions { parallelism, order, early_stop_depth: None }).unwrap();
        let (a, b) = (run(Parallelism::Parallel), run(Parallelism::Sequential));
        prop_assert_eq!(&a.cells, &b.cells);
        prop_assert_eq!(&a.outside, &b.outside);
        prop_assert_eq!(a.stats.sat_calls, b.stats.sat_calls);
        prop_assert_eq!(run(Parallelism::Parallel).cells, a.cells);
    }

    #[test]
    fn early_stopping_contains_the_exact_range(seed in 0u64..1_000_000, k in 0usize..4) {
        let inst = random_instance(seed);
        for agg in [Aggregate::Sum, Aggregate::Count, Aggregate::Max, Aggregate::Min] {
            let attr = (agg != Aggregate::Count).then_some(1);
            let exact = bound_region(agg, attr, Some(&inst.predicate), &inst.set, &inst.existing, &BoundOptions::default()).unwrap();
            let opts = BoundOptions { early_stop_depth: Some(k), ..Default::default() };
            let loose = bound_region(agg, attr, Some(&inst.predicate), &inst.set, &inst.existing, &opts).unwrap();
            if exact.status == Status::Exact && loose.is_bounded() {
                prop_assert!(loose.upper.unwrap() >= exact.upper.unwrap() - 1e-9);
                prop_assert!(loose.lower.unwrap() <= exact.lower.unwrap() + 1e-9);
            }
        }
    }
}

fn overlap20_query() -> Predicate {
    Predicate::range("x", Interval::closed(10.0, 70.0)).with("y", rangebound::predicate::Atom::Range(Interval::closed(15.0, 85.0)))
}

#[test]
fn twenty_overlapping_constraints_prune_well() {
    let set = load_set("overlap20.json");
    assert_eq!(set.len(), 20);
    let d = decompose(&set, None, &DecomposeOptions::default()).unwrap();
    assert!(d.stats.sat_calls <= (1 << 20) / 100, "{} calls", d.stats.sat_calls);
    assert!(d.cells.len() * 100 <= 1 << 20, "{} cells", d.cells.len());
    assert_disjoint(&d);

    let first12 = set.select(&(0..12).collect::<Vec<_>>()).unwrap();
    let dfs: Vec<Vec<usize>> =
        decompose(&first12, None, &DecomposeOptions::default()).unwrap().cells.iter().map(|c| c.covering.clone()).collect();
    assert_eq!(dfs, enumerate_naive(&first12, None).unwrap());
}

#[test]
fn twenty_constraints_early_stop_contains_exact() {
    let set = load_set("overlap20.json");
    let q = overlap20_query();
    let v = set.schema().index_of("v");
    let exact = bound_region(Aggregate::Sum, v, Some(&q), &set, &[], &BoundOptions::default()).unwrap();
    assert_eq!(exact.status, Status::Exact);
    for k in [2, 5, 8] {
        let opts = BoundOptions { early_stop_depth: Some(k), ..Default::default() };
        let r = bound_region(Aggregate::Sum, v, Some(&q), &set, &[], &opts).unwrap();
        assert_eq!(r.status, Status::EarlyStopLoose);
        assert!(r.upper >= exact.upper && r.lower <= exact.lower, "K={k}: {:?}..{:?}", r.lower, r.upper);
    }
}

mod common;

use std::time::Instant;

use common::{data_path, independent_set_constraints, load_set, max_independent_set, random_graph, random_partition, EX44_QUERY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangebound::bound::{bound_query, greedy_disjoint, BoundOptions, BoundOutput, ResultRange, Status};
use rangebound::decompose::{decompose, DecomposeOptions};
use rangebound::harness::{ingest_csv, IngestMode};
use rangebound::pc::Closure;
use rangebound::predicate::{Interval, Predicate};
use rangebound::query::{parse_query, Aggregate, QuerySpec};

fn single(out: BoundOutput) -> ResultRange {
    out.single().expect("no GROUP BY").clone()
}

fn cents(x: Option<f64>) -> i64 {
    (x.unwrap() * 100.0).round() as i64
}

#[test]
fn disjoint_days_example() {
    let set = load_set("ex44_disjoint.json");
    let q = parse_query(EX44_QUERY, Some(set.schema())).unwrap();
    let r = single(bound_query(&q, &set, None, &BoundOptions::default()).unwrap());
    assert_eq!(r.status, Status::Exact);
    assert_eq!((cents(r.lower), cents(r.upper)), (9900, 2799800));
}

#[test]
fn overlapping_days_example() {
    let set = load_set("ex44_overlap.json");
    let q = parse_query(EX44_QUERY, Some(set.schema())).unwrap();
    let r = single(bound_query(&q, &set, None, &BoundOptions::default()).unwrap());
    assert_eq!((cents(r.lower), cents(r.upper)), (7425, 1774875));
    assert_eq!(r.witness_upper, Some(vec![50, 75]));
    assert_eq!(r.witness_lower, Some(vec![50, 25]));
    let coverings: Vec<Vec<String>> = r.cells.iter().map(|c| c.covering.clone()).collect();
    assert_eq!(coverings, vec![vec!["t1".to_string(), "t2".to_string()], vec!["t2".to_string()]]);

    // The cell inside t1 but outside t2 cannot hold a row.
    let d = decompose(&set, None, &DecomposeOptions::default()).unwrap();
    assert!(d.cells.iter().all(|c| c.covering != vec![0]));
}

#[test]
fn sales_rows_combine_with_constraints() {
    let schema = std::sync::Arc::new(
        serde_json::from_str::<rangebound::schema::Schema>(&std::fs::read_to_string(data_path("sales_schema.json")).unwrap()).unwrap(),
    );
    let rows = ingest_csv(data_path("sales.csv"), schema.clone(), IngestMode::Strict).unwrap().relation;
    assert_eq!(rows.len(), 3);
    let set = load_set("nonclosed.json");
    assert!(matches!(set.check_closure(None).unwrap(), Closure::Counterexample(_)));

    let q = parse_query("SELECT COUNT(*) FROM sales WHERE branch = 'New York'", Some(&schema)).unwrap();
    let r = single(bound_query(&q, &set, Some(&rows), &BoundOptions::default()).unwrap());
    let existing = rows.rows().iter().filter(|t| t.0[1].to_string() == "New York").count() as f64;
    let kappa = set.get(0).kappa;
    assert_eq!((r.lower, r.upper), (Some(existing + kappa.kl as f64), Some(existing + kappa.ku as f64)));

    let q = parse_query("SELECT COUNT(*) FROM sales", Some(&schema)).unwrap();
    let r = single(bound_query(&q, &set, Some(&rows), &BoundOptions::default()).unwrap());
    assert_eq!(r.status, Status::NotClosed);
    assert!(r.counterexample.is_some());
}

#[test]
fn max_sum_equals_maximum_independent_set() {
    for seed in 0..50 {
        let (n, edges) = random_graph(seed);
        let set = independent_set_constraints(n, &edges);
        let q = QuerySpec::new(Aggregate::Sum, Some("w"), "g");
        let r = single(bound_query(&q, &set, None, &BoundOptions::default()).unwrap());
        assert_eq!(r.upper, Some(max_independent_set(n, &edges) as f64), "seed {seed}: {n} vertices, {edges:?}");
    }
}

fn random_range_query(seed: u64, agg: Aggregate) -> QuerySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (rng.random_range(0.0..100.0f64).round(), rng.random_range(0.0..100.0f64).round());
    let target = (agg == Aggregate::Sum).then_some("v");
    QuerySpec::new(agg, target, "t").with_predicate(Some(Predicate::range("x", Interval::closed(a.min(b), a.max(b)))))
}

#[test]
fn greedy_matches_milp_on_disjoint_sets() {
    let milp = BoundOptions { disjoint_fast_path: false, ..Default::default() };
    for seed in 0..100 {
        let set = random_partition(seed, 1 + seed as usize % 12);
        for agg in [Aggregate::Sum, Aggregate::Count] {
            let q = random_range_query(seed, agg);
            let g = greedy_disjoint(&set, &q).unwrap();
            let m = single(bound_query(&q, &set, None, &milp).unwrap());
            assert_eq!(g.status, m.status, "seed {seed} {agg}");
            for (x, y) in [(g.lower, m.lower), (g.upper, m.upper)] {
                assert!((x.unwrap() - y.unwrap()).abs() <= 1e-6 * (1.0 + y.unwrap().abs()), "seed {seed} {agg}: {x:?} vs {y:?}");
            }
        }
    }
}

#[test]
fn greedy_rejects_overlap() {
    let set = load_set("ex44_overlap.json");
    let q = parse_query(EX44_QUERY, Some(set.schema())).unwrap();
    assert!(greedy_disjoint(&set, &q).is_err());
}

#[test]
fn large_partition_answers_quickly() {
    let set = random_partition(1, 2000);
    let q = random_range_query(1, Aggregate::Sum);
    let start = Instant::now();
    let r = single(bound_query(&q, &set, None, &BoundOptions::default()).unwrap());
    assert!(r.is_bounded());
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
}

//! Sequential against rayon-parallel execution of the two parallel hot
//! spots: the cell decomposition DFS and a batch of queries.

use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rangebound::bound::{bound_query, BoundOptions};
use rangebound::decompose::{decompose, DecomposeOptions};
use rangebound::harness::{gen_rand_pc, make_scenario, synthetic_dataset, RemovalMode};
use rangebound::par::{self, Parallelism};
use rangebound::pc::PcSet;
use rangebound::query::parse_query;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn overlap20() -> PcSet {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/overlap20.json");
    PcSet::from_json_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn decomposition(c: &mut Criterion) {
    let set = overlap20();
    let mut g = c.benchmark_group("decompose_overlap20");
    for (name, parallelism) in MODES {
        let opts = DecomposeOptions { parallelism, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| b.iter(|| decompose(black_box(&set), None, opts).unwrap()));
    }
    g.finish();
}

fn query_batch(c: &mut Criterion) {
    let scenario = make_scenario(synthetic_dataset(20_000, 7), "value", 0.1, RemovalMode::Random, 1).unwrap();
    let missing = scenario.missing_relation();
    let set = gen_rand_pc(&missing, &["utc", "device"], "value", 12, 3).unwrap();
    let queries: Vec<_> = ["d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7"]
        .iter()
        .map(|d| parse_query(&format!("SELECT SUM(value) FROM t WHERE device = '{d}' AND value >= 100"), Some(set.schema())).unwrap())
        .collect();
    let mut g = c.benchmark_group("query_batch_rand12");
    g.sample_size(20);
    for (name, parallelism) in MODES {
        let opts = BoundOptions { parallelism, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| par::map(parallelism, &queries, |q| bound_query(q, &set, None, opts).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, decomposition, query_batch);
criterion_main!(benches);

//! Oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rangebound::harness::{gen_corr_pc, gen_rand_pc};
use rangebound::join::{JoinGraph, JoinRelation};
use rangebound::pc::{Frequency, PcSet, PredicateConstraint, ValueConstraint};
use rangebound::predicate::{endpoint_grid, Atom, Interval, Predicate, Region};
use rangebound::query::{Aggregate, QuerySpec};
use rangebound::schema::{Attribute, Relation, Schema, Tuple, Value};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn load_set(name: &str) -> PcSet {
    PcSet::from_json_str(&std::fs::read_to_string(data_path(name)).unwrap()).unwrap()
}

pub const EX44_QUERY: &str = "SELECT SUM(price) FROM sales WHERE utc >= Nov-11 0:00 AND utc <= Nov-13 0:00";

/// What enumeration says about one aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Range(f64, f64),
    NoRows,
    Infeasible,
    NotClosed,
}

#[derive(Debug, Clone)]
struct Group {
    mask: u32,
    inside: bool,
    lo: f64,
    hi: f64,
}

/// Enumerates every multiset of grid-representative tuples admitted by the
/// windows and returns the range of `agg` over attribute `attr` (ignored for
/// COUNT), adding the `existing` rows that fall inside the query.
///
/// Tuples sharing the same constraint memberships and query membership are
/// interchangeable for the windows, so only their counts are enumerated; each
/// row then sits at the largest (or smallest) admissible grid value of its
/// group, which is where every aggregate here is extreme.
pub fn enumerate(set: &PcSet, query: &Region, attr: usize, agg: Aggregate, existing: &[Vec<f64>]) -> Oracle {
    let schema = set.schema();
    let n = set.len();
    let mut boxes: Vec<Region> = vec![Region::domain(schema), query.clone()];
    for j in 0..n {
        boxes.push(set.region(j).clone());
        boxes.push(set.nu_region(j).clone());
    }
    let axes: Vec<Vec<f64>> = endpoint_grid(&boxes).iter().map(|a| a.representatives()).collect();
    let mut tuples: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        tuples = tuples.iter().flat_map(|t| axis.iter().map(move |x| [t.clone(), vec![*x]].concat())).collect();
    }
    let domain = Region::domain(schema);
    let mut groups: BTreeMap<(u32, bool), Group> = BTreeMap::new();
    for t in tuples.iter().filter(|t| domain.contains_encoded(t)) {
        let mask = (0..n).filter(|&j| set.region(j).contains_encoded(t)).fold(0u32, |m, j| m | 1 << j);
        let inside = query.contains_encoded(t);
        if mask == 0 {
            if inside {
                return Oracle::NotClosed;
            }
            continue;
        }
        if (0..n).any(|j| mask & 1 << j != 0 && !set.nu_region(j).contains_encoded(t)) {
            continue;
        }
        let g = groups.entry((mask, inside)).or_insert(Group { mask, inside, lo: f64::INFINITY, hi: f64::NEG_INFINITY });
        g.lo = g.lo.min(t[attr]);
        g.hi = g.hi.max(t[attr]);
    }
    let groups: Vec<Group> = groups.into_values().collect();
    let windows: Vec<Frequency> = set.constraints().iter().map(|pc| pc.kappa).collect();

    let inside_rows: Vec<&Vec<f64>> = existing.iter().filter(|r| query.contains_encoded(r)).collect();
    let e_count = inside_rows.len() as f64;
    let e_sum: f64 = inside_rows.iter().map(|r| r[attr]).sum();
    let e_max = inside_rows.iter().map(|r| r[attr]).fold(f64::NEG_INFINITY, f64::max);
    let e_min = inside_rows.iter().map(|r| r[attr]).fold(f64::INFINITY, f64::min);

    let mut state = Search { groups: &groups, windows: &windows, counts: vec![0; groups.len()], sums: vec![0; n], best: None, agg };
    state.run(0, &mut |counts, groups| {
        let (mut c, mut s_hi, mut s_lo) = (e_count, e_sum, e_sum);
        let (mut max_hi, mut max_lo, mut min_hi, mut min_lo) = (e_max, e_max, e_min, e_min);
        for (g, &k) in groups.iter().zip(counts) {
            if !g.inside || k == 0 {
                continue;
            }
            c += k as f64;
            s_hi += k as f64 * g.hi;
            s_lo += k as f64 * g.lo;
            max_hi = max_hi.max(g.hi);
            max_lo = max_lo.max(g.lo);
            min_hi = min_hi.min(g.hi);
            min_lo = min_lo.min(g.lo);
        }
        match agg {
            Aggregate::Count => Some((c, c)),
            Aggregate::Sum => Some((s_lo, s_hi)),
            _ if c == 0.0 => None,
            Aggregate::Avg => Some((s_lo / c, s_hi / c)),
            Aggregate::Max => Some((max_lo, max_hi)),
            Aggregate::Min => Some((min_lo, min_hi)),
        }
    });
    match state.best {
        None => Oracle::Infeasible,
        Some(None) => Oracle::NoRows,
        Some(Some((lo, hi))) => Oracle::Range(lo, hi),
    }
}

type Leaf<'l> = dyn FnMut(&[u64], &[Group]) -> Option<(f64, f64)> + 'l;

struct Search<'a> {
    groups: &'a [Group],
    windows: &'a [Frequency],
    counts: Vec<u64>,
    sums: Vec<u64>,
    /// `None` until a feasible leaf; then the hull of the leaf values, or
    /// `None` inside when no feasible leaf had a row.
    best: Option<Option<(f64, f64)>>,
    agg: Aggregate,
}

impl Search<'_> {
    fn run(&mut self, g: usize, leaf: &mut Leaf) {
        if g == self.groups.len() {
            if self.sums.iter().zip(self.windows).all(|(s, w)| w.admits(*s)) {
                let v = leaf(&self.counts, self.groups);
                let merged = match (self.best.flatten(), v) {
                    (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
                    (x, y) => x.or(y),
                };
                self.best = Some(merged);
            }
            return;
        }
        let mask = self.groups[g].mask;
        let members: Vec<usize> = (0..self.windows.len()).filter(|&j| mask & 1 << j != 0).collect();
        let mut k = 0;
        loop {
            if members.iter().any(|&j| self.sums[j] + k > self.windows[j].ku) {
                break;
            }
            self.counts[g] = k;
            for &j in &members {
                self.sums[j] += k;
            }
            self.run(g + 1, leaf);
            for &j in &members {
                self.sums[j] -= k;
            }
            k += 1;
        }
        self.counts[g] = 0;
    }
}

/// A random instance of at most 4 constraints over a predicate attribute `x`
/// (numeric or categorical) and a value attribute `v`, endpoints on a grid of
/// 5 values and windows with `k_u <= 6`.
pub struct Instance {
    pub set: PcSet,
    pub predicate: Predicate,
    pub existing: Vec<Vec<f64>>,
}

pub const GRID: [f64; 5] = [0.0, 2.0, 4.0, 6.0, 8.0];

fn closed(rng: &mut ChaCha8Rng) -> Interval {
    let (a, b) = (GRID[rng.random_range(0..5)], GRID[rng.random_range(0..5)]);
    Interval::closed(a.min(b), a.max(b))
}

fn flagged(rng: &mut ChaCha8Rng) -> Interval {
    let i = closed(rng);
    let lo_open = i.lo < i.hi && rng.random_bool(0.3);
    let hi_open = i.lo < i.hi && rng.random_bool(0.3);
    Interval::new(i.lo, i.hi, lo_open, hi_open)
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let categorical = rng.random_bool(0.3);
    let x = if categorical { Attribute::categorical("x", ["a", "b", "c"]) } else { Attribute::numeric("x", 0.0, 8.0) };
    let schema = Arc::new(Schema::new(vec![x, Attribute::numeric("v", 0.0, 8.0)]).unwrap());
    let x_atom = |rng: &mut ChaCha8Rng| -> Atom {
        if categorical {
            loop {
                let pick: Vec<&str> = ["a", "b", "c"].into_iter().filter(|_| rng.random_bool(0.5)).collect();
                if !pick.is_empty() {
                    break Atom::one_of(pick);
                }
            }
        } else {
            Atom::Range(flagged(rng))
        }
    };
    let n = rng.random_range(1..=4);
    let pcs = (0..n)
        .map(|j| {
            let psi = if rng.random_bool(0.15) { Predicate::always() } else { Predicate::always().with("x", x_atom(&mut rng)) };
            let nu = if rng.random_bool(0.7) {
                let i = closed(&mut rng);
                ValueConstraint::none().with("v", i.lo, i.hi)
            } else {
                ValueConstraint::none()
            };
            let kl = rng.random_range(0..=2);
            let ku = rng.random_range(kl.max(1)..=6);
            PredicateConstraint::new(format!("p{j}"), psi, nu, Frequency::new(kl, ku))
        })
        .collect();
    let set = PcSet::new(schema.clone(), pcs).unwrap();
    let mut predicate = Predicate::always();
    if rng.random_bool(0.8) {
        predicate = predicate.with("x", x_atom(&mut rng));
    }
    if rng.random_bool(0.3) {
        predicate = predicate.with("v", Atom::Range(closed(&mut rng)));
    }
    let existing = (0..rng.random_range(0..=2))
        .map(|_| {
            let x = if categorical { rng.random_range(0..3) as f64 } else { GRID[rng.random_range(0..5)] };
            vec![x, GRID[rng.random_range(0..5)]]
        })
        .collect();
    Instance { set, predicate, existing }
}

pub fn query(agg: Aggregate, predicate: &Predicate) -> QuerySpec {
    let target = (agg != Aggregate::Count).then_some("v");
    QuerySpec::new(agg, target, "t").with_predicate(Some(predicate.clone()))
}

/// Maximum independent set size by exhaustive search.
pub fn max_independent_set(n: usize, edges: &[(usize, usize)]) -> u32 {
    (0u32..1 << n).filter(|s| edges.iter().all(|&(a, b)| s & (1 << a) == 0 || s & (1 << b) == 0)).map(u32::count_ones).max().unwrap_or(0)
}

pub fn random_graph(seed: u64) -> (usize, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=10);
    let p = rng.random_range(0.1..0.7);
    let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|_| rng.random_bool(p)).collect();
    (n, edges)
}

/// One constraint per vertex (value at most 1, at most one row) and one per
/// edge covering both endpoints with at most one row.
pub fn independent_set_constraints(n: usize, edges: &[(usize, usize)]) -> PcSet {
    let names: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
    let schema = Arc::new(Schema::new(vec![Attribute::categorical("x", names.clone()), Attribute::numeric("w", 0.0, 1.0)]).unwrap());
    let mut pcs: Vec<PredicateConstraint> = (0..n)
        .map(|v| {
            PredicateConstraint::new(
                format!("n{v}"),
                Predicate::member("x", [names[v].as_str()]),
                ValueConstraint::none().with("w", 0.0, 1.0),
                Frequency::at_most(1),
            )
        })
        .collect();
    for (a, b) in edges {
        pcs.push(PredicateConstraint::new(
            format!("e{a}_{b}"),
            Predicate::member("x", [names[*a].as_str(), names[*b].as_str()]),
            ValueConstraint::none().with("w", 0.0, 1.0),
            Frequency::at_most(1),
        ));
    }
    PcSet::new(schema, pcs).unwrap()
}

/// A random partition of `[0, 100]` on `x` into `parts` (at most 10000)
/// pairwise-disjoint constraints with values on `v`.
pub fn random_partition(seed: u64, parts: usize) -> PcSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Arc::new(Schema::new(vec![Attribute::numeric("x", 0.0, 100.0), Attribute::numeric("v", -50.0, 50.0)]).unwrap());
    let mut cuts = std::collections::BTreeSet::new();
    while cuts.len() + 1 < parts {
        cuts.insert(rng.random_range(1..10_000u32));
    }
    let mut edges = vec![0.0];
    edges.extend(cuts.into_iter().map(|c| f64::from(c) / 100.0));
    edges.push(100.0);
    let pcs = edges
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let last = j + 2 == edges.len();
            let iv = if last { Interval::closed(w[0], w[1]) } else { Interval::right_open(w[0], w[1]) };
            let (a, b) = (rng.random_range(-50.0..50.0f64).round(), rng.random_range(-50.0..50.0f64).round());
            let kl = rng.random_range(0..4);
            PredicateConstraint::new(
                format!("d{j}"),
                Predicate::range("x", iv),
                ValueConstraint::none().with("v", a.min(b), a.max(b)),
                Frequency::new(kl, kl + rng.random_range(0..6)),
            )
        })
        .collect();
    PcSet::new(schema, pcs).unwrap()
}

/// A tiny materialized join: relations over small integer domains with at
/// most 4 rows each, and truthful constraint sets derived from the rows.
/// With `distinct` each relation is a set and the graph says so.
pub struct JoinInstance {
    pub relations: Vec<(String, Relation)>,
    pub graph: JoinGraph,
}

const SHAPES: [&[(&str, &[&str])]; 3] = [
    &[("R", &["a", "b", "v"]), ("S", &["b", "c"]), ("T", &["c", "a"])],
    &[("R", &["a", "v"]), ("S", &["a", "b"]), ("T", &["b", "c"])],
    &[("R", &["a", "b", "v"]), ("S", &["b"])],
];

pub fn random_join(seed: u64, distinct: bool) -> JoinInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = SHAPES[rng.random_range(0..SHAPES.len())];
    let mut relations = Vec::new();
    let mut graph = Vec::new();
    for (name, attrs) in shape {
        let schema = Arc::new(
            Schema::new(
                attrs
                    .iter()
                    .map(|a| if *a == "v" { Attribute::numeric("v", 0.0, 10.0) } else { Attribute::numeric(*a, 0.0, 3.0) })
                    .collect(),
            )
            .unwrap(),
        );
        let mut rows: Vec<Tuple> = (0..rng.random_range(1..=4))
            .map(|_| {
                Tuple(
                    attrs
                        .iter()
                        .map(|a| Value::Num(if *a == "v" { rng.random_range(0..=10) } else { rng.random_range(0..=1) } as f64))
                        .collect(),
                )
            })
            .collect();
        if distinct {
            let mut seen = Vec::new();
            rows.retain(|t| {
                if seen.contains(t) {
                    false
                } else {
                    seen.push(t.clone());
                    true
                }
            });
        }
        let rel = Relation::new(schema, rows).unwrap();
        let keys: Vec<&str> = attrs.iter().copied().filter(|a| *a != "v").collect();
        let agg = if attrs.contains(&"v") { "v" } else { attrs[0] };
        let pcs = if rng.random_bool(0.5) {
            gen_corr_pc(&rel, &keys[..1], agg, rng.random_range(1..=3)).unwrap()
        } else {
            gen_rand_pc(&rel, &keys, agg, rng.random_range(0..=3), rng.random()).unwrap()
        };
        graph.push(JoinRelation { name: name.to_string(), pcs });
        relations.push((name.to_string(), rel));
    }
    JoinInstance { relations, graph: JoinGraph::new(graph).unwrap().with_distinct_rows(distinct) }
}

/// Evaluates `agg` over the natural join by nested loops. Returns `None`
/// for AVG/MIN/MAX over an empty join.
pub fn evaluate_join(inst: &JoinInstance, query: &QuerySpec) -> Option<f64> {
    let joined = inst.graph.joined_schema().unwrap();
    let mut partial: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new()];
    for (_, rel) in &inst.relations {
        let names: Vec<String> = rel.schema().attributes().iter().map(|a| a.name.clone()).collect();
        let mut next = Vec::new();
        for p in &partial {
            for row in rel.encoded() {
                if names.iter().zip(&row).all(|(n, x)| p.get(n).is_none_or(|y| y == x)) {
                    let mut q = p.clone();
                    q.extend(names.iter().cloned().zip(row.iter().copied()));
                    next.push(q);
                }
            }
        }
        partial = next;
    }
    let matching: Vec<f64> = partial
        .iter()
        .filter(|p| {
            let t = Tuple(joined.attributes().iter().map(|a| Value::Num(p[&a.name])).collect());
            query.predicate.as_ref().is_some_and(|pr| pr.evaluate(&joined, &t).unwrap())
        })
        .map(|p| query.target.as_ref().map_or(1.0, |t| p[t]))
        .collect();
    let n = matching.len() as f64;
    match query.aggregate {
        Aggregate::Count => Some(n),
        Aggregate::Sum => Some(matching.iter().sum()),
        _ if matching.is_empty() => None,
        Aggregate::Avg => Some(matching.iter().sum::<f64>() / n),
        Aggregate::Min => matching.iter().copied().reduce(f64::min),
        Aggregate::Max => matching.iter().copied().reduce(f64::max),
    }
}

#[derive(serde::Deserialize)]
pub struct ParserCase {
    pub name: String,
    #[serde(default)]
    pub schema: bool,
    pub query: String,
}

pub fn parser_cases() -> Vec<ParserCase> {
    serde_json::from_str(&std::fs::read_to_string(data_path("parser").join("cases.json")).unwrap()).unwrap()
}

/// The parser's answer to a case, as stored in its golden file.
pub fn render_case(case: &ParserCase, schema: &Schema) -> String {
    use serde_json::json;
    let v = match rangebound::query::parse_query(&case.query, case.schema.then_some(schema)) {
        Ok(q) => json!({ "query": case.query, "spec": q }),
        Err(rangebound::Error::Syntax { offset, message }) => {
            json!({ "query": case.query, "syntax_error": { "offset": offset, "message": message } })
        }
        Err(e) => json!({ "query": case.query, "error": e.to_string() }),
    };
    serde_json::to_string_pretty(&v).unwrap() + "\n"
}

/// Names of the cases whose golden file differs; rewrites them all instead
/// when `update` is set.
pub fn check_golden(cases: &[ParserCase], update: bool) -> Vec<String> {
    let schema: Schema = serde_json::from_str(&std::fs::read_to_string(data_path("sales_schema.json")).unwrap()).unwrap();
    let dir = data_path("parser").join("golden");
    let mut mismatched = Vec::new();
    for case in cases {
        let text = render_case(case, &schema);
        let path = dir.join(format!("{}.json", case.name));
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &text).unwrap();
        } else if std::fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            mismatched.push(case.name.clone());
        }
    }
    mismatched
}

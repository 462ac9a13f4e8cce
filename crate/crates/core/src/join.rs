//! Bounds for aggregates over natural joins of several relations, each with
//! its own constraint set.
//!
//! The naive bound multiplies constraints across relations and runs the
//! single-table pipeline on the products. The cover bound solves a
//! fractional edge cover LP over the join hypergraph and combines per-relation
//! COUNT/SUM upper bounds as a weighted product. That inequality holds for
//! relations without duplicate rows only, so the cover bound runs when the
//! graph declares `distinct_rows`; otherwise the naive bound stands alone.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bound::{bound_query, bound_region, BoundOptions, ResultRange, Status};
use crate::error::{Error, Result};
use crate::opt::{solve_lp, Cmp, LinearProgram, Sense};
use crate::pc::{Frequency, PcSet, PredicateConstraint, ValueConstraint};
use crate::predicate::{conjoin, Interval, Predicate};
use crate::query::{Aggregate, QuerySpec};
use crate::schema::{Domain, Schema};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinRelation {
    pub name: String,
    #[serde(flatten)]
    pub pcs: PcSet,
}

/// Relations joined on equally named attributes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "JoinGraphJson")]
pub struct JoinGraph {
    relations: Vec<JoinRelation>,
    distinct_rows: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinGraphJson {
    relations: Vec<JoinRelation>,
    #[serde(default)]
    distinct_rows: bool,
}

impl TryFrom<JoinGraphJson> for JoinGraph {
    type Error = Error;

    fn try_from(j: JoinGraphJson) -> Result<Self> {
        Ok(JoinGraph::new(j.relations)?.with_distinct_rows(j.distinct_rows))
    }
}

impl JoinGraph {
    pub fn new(relations: Vec<JoinRelation>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::Join("a join needs at least one relation".into()));
        }
        let mut names = BTreeSet::new();
        for r in &relations {
            if !names.insert(r.name.as_str()) {
                return Err(Error::Join(format!("relation `{}` listed twice", r.name)));
            }
        }
        let g = JoinGraph { relations, distinct_rows: false };
        g.joined_schema()?;
        Ok(g)
    }

    /// Declares that no relation holds two identical rows, which enables the
    /// cover bound.
    pub fn with_distinct_rows(mut self, distinct: bool) -> Self {
        self.distinct_rows = distinct;
        self
    }

    pub fn distinct_rows(&self) -> bool {
        self.distinct_rows
    }

    pub fn relations(&self) -> &[JoinRelation] {
        &self.relations
    }

    /// Attribute names of each relation.
    pub fn attribute_sets(&self) -> Vec<BTreeSet<String>> {
        self.relations.iter().map(|r| r.pcs.schema().attributes().iter().map(|a| a.name.clone()).collect()).collect()
    }

    /// Attributes shared by two or more relations.
    pub fn join_attributes(&self) -> BTreeSet<String> {
        let mut seen = BTreeMap::new();
        for set in self.attribute_sets() {
            for a in set {
                *seen.entry(a).or_insert(0) += 1;
            }
        }
        seen.into_iter().filter(|(_, k)| *k >= 2).map(|(a, _)| a).collect()
    }

    pub fn joined_schema(&self) -> Result<Schema> {
        let mut s = (**self.relations[0].pcs.schema()).clone();
        for r in &self.relations[1..] {
            s = s.unify(r.pcs.schema()).map_err(|e| Error::Join(e.to_string()))?;
        }
        Ok(s)
    }

    fn check_query(&self, query: &QuerySpec) -> Result<Option<usize>> {
        let want: BTreeSet<&str> = query.relations.iter().map(String::as_str).collect();
        let have: BTreeSet<&str> = self.relations.iter().map(|r| r.name.as_str()).collect();
        if want != have {
            return Err(Error::Semantic(format!(
                "query joins {:?} but the graph holds {:?}",
                want.into_iter().collect::<Vec<_>>(),
                have.into_iter().collect::<Vec<_>>()
            )));
        }
        query.validate(&self.joined_schema()?)?;
        if query.group_by.is_some() {
            return Err(Error::Semantic("GROUP BY is not supported over joins".into()));
        }
        match (&query.target, query.aggregate) {
            (_, Aggregate::Count) | (None, _) => Ok(None),
            (Some(t), _) => {
                let owners: Vec<usize> =
                    (0..self.relations.len()).filter(|&i| self.relations[i].pcs.schema().index_of(t).is_some()).collect();
                match owners.as_slice() {
                    [a] => Ok(Some(*a)),
                    _ => Err(Error::Semantic(format!("aggregate attribute `{t}` must belong to exactly one relation"))),
                }
            }
        }
    }
}

/// Product of two constraints under natural-join semantics: predicates and
/// value ranges are conjoined on shared attributes, windows multiplied.
/// `None` when the product can hold no joined tuple.
pub fn natural_product(schema: &Schema, a: &PredicateConstraint, b: &PredicateConstraint, shares: bool) -> Option<PredicateConstraint> {
    let psi = conjoin(&a.psi, &b.psi)?;
    if psi.to_region(schema).ok()?.is_empty() {
        return None;
    }
    let mut nu = BTreeMap::new();
    for (k, v) in a.nu.0.iter().chain(&b.nu.0) {
        let Some(Domain::Numeric { lo, hi }) = schema.attribute(k).map(|a| &a.domain) else { return None };
        let prev = nu.get(k).copied().unwrap_or(Interval::closed(*lo, *hi));
        let merged = prev.intersect(v);
        if merged.is_empty() {
            return None;
        }
        nu.insert(k.clone(), merged);
    }
    // Shared attributes let one row pair with many partners, so a row count
    // lower bound does not survive the product.
    let kl = if shares { 0 } else { a.kappa.kl.saturating_mul(b.kappa.kl) };
    let kappa = Frequency::new(kl, a.kappa.ku.saturating_mul(b.kappa.ku));
    Some(PredicateConstraint::new(format!("{}*{}", a.id, b.id), psi, ValueConstraint(nu), kappa))
}

/// The constraint set of the joined table, folded left to right.
pub fn product_set(graph: &JoinGraph) -> Result<PcSet> {
    let first = &graph.relations[0].pcs;
    let mut schema = (**first.schema()).clone();
    let mut products: Vec<PredicateConstraint> = first.constraints().to_vec();
    for r in &graph.relations[1..] {
        let next = r.pcs.schema();
        let shares = next.attributes().iter().any(|a| schema.index_of(&a.name).is_some());
        schema = schema.unify(next).map_err(|e| Error::Join(e.to_string()))?;
        products = products
            .iter()
            .flat_map(|a| r.pcs.constraints().iter().map(move |b| (a, b)))
            .filter_map(|(a, b)| natural_product(&schema, a, b, shares))
            .collect();
        if products.is_empty() {
            break;
        }
    }
    if products.is_empty() {
        // No product can hold a tuple: the join is empty.
        products.push(PredicateConstraint::new("empty", Predicate::always(), ValueConstraint::none(), Frequency::at_most(0)));
    }
    PcSet::new(Arc::new(schema), products)
}

/// Single-table pipeline over the product constraint set.
pub fn naive_join_bound(graph: &JoinGraph, query: &QuerySpec, opts: &BoundOptions) -> Result<ResultRange> {
    graph.check_query(query)?;
    let set = product_set(graph)?;
    let mut single = query.clone();
    single.relations = vec!["joined".into()];
    let out = bound_query(&single, &set, None, opts)?;
    Ok(out.single().expect("no GROUP BY").clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMode {
    /// SUM over the attribute owned by relation `a`; its weight is pinned to 1.
    Sum {
        a: usize,
    },
    Count,
}

/// Minimizes `Σ c_i ln(term_i)` subject to `Σ_{i ∋ s} c_i >= 1` for every
/// attribute `s` and `c >= 0`.
pub fn fec_lp(graph: &JoinGraph, terms: &[f64], mode: CoverMode) -> Result<Vec<f64>> {
    let sets = graph.attribute_sets();
    let n = sets.len();
    let all: BTreeSet<&String> = sets.iter().flatten().collect();
    let mut lp = LinearProgram::new(Sense::Min, terms.iter().map(|t| t.ln()).collect());
    for s in all {
        let covering: Vec<usize> = (0..n).filter(|&i| sets[i].contains(s)).collect();
        if covering.is_empty() {
            return Err(Error::Join(format!("attribute `{s}` is covered by no relation")));
        }
        lp.add_sum(&covering, Cmp::Ge, 1.0);
    }
    if let CoverMode::Sum { a } = mode {
        lp.bounds[a] = (1.0, 1.0);
    }
    let out = solve_lp(&lp);
    if !out.is_optimal() {
        return Err(Error::Join(format!("cover LP ended {:?}", out.status)));
    }
    Ok(out.x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationSummary {
    pub relation: String,
    pub count_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinMethod {
    Naive,
    /// Weighted product only; lower end is the trivial 0.
    Gwe,
    /// Weighted product capped by the naive bound.
    #[default]
    Best,
}

#[derive(Debug, Clone, Serialize)]
pub struct JoinOutcome {
    #[serde(flatten)]
    pub range: ResultRange,
    pub method: JoinMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub summaries: Vec<RelationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gwe_upper: Option<f64>,
}

/// Per-relation summaries with the query predicate pushed into each relation.
fn summaries(
    graph: &JoinGraph,
    query: &QuerySpec,
    agg_rel: Option<usize>,
    opts: &BoundOptions,
) -> Result<std::result::Result<Vec<RelationSummary>, ResultRange>> {
    let mut out = Vec::with_capacity(graph.relations.len());
    for (i, r) in graph.relations.iter().enumerate() {
        let schema = r.pcs.schema();
        let pushed = query.predicate.as_ref().map(|p| p.restrict(|a| schema.index_of(a).is_some()));
        let count = bound_region(Aggregate::Count, None, pushed.as_ref(), &r.pcs, &[], opts)?;
        if !count.is_bounded() {
            return Ok(Err(count));
        }
        let sum_upper = if Some(i) == agg_rel {
            let attr = schema.require(query.target.as_deref().expect("SUM has a target"))?;
            let sum = bound_region(Aggregate::Sum, Some(attr), pushed.as_ref(), &r.pcs, &[], opts)?;
            if !sum.is_bounded() {
                return Ok(Err(sum));
            }
            sum.upper
        } else {
            None
        };
        out.push(RelationSummary { relation: r.name.clone(), count_upper: count.upper.unwrap_or(0.0), sum_upper });
    }
    Ok(Ok(out))
}

type CoverBound = (f64, Vec<f64>, Vec<RelationSummary>);

/// Cover-based bound for SUM/COUNT, returned as `(upper, cover, summaries)`;
/// `None` when the aggregate or the value signs rule the method out.
fn gwe_upper(
    graph: &JoinGraph,
    query: &QuerySpec,
    opts: &BoundOptions,
    notes: &mut Vec<String>,
) -> Result<std::result::Result<Option<CoverBound>, ResultRange>> {
    let agg_rel = graph.check_query(query)?;
    if !graph.distinct_rows {
        notes.push("relations may repeat rows; weighted-product bound needs distinct_rows".into());
        return Ok(Ok(None));
    }
    let mode = match (query.aggregate, agg_rel) {
        (Aggregate::Count, _) => CoverMode::Count,
        (Aggregate::Sum, Some(a)) => {
            let schema = graph.relations[a].pcs.schema();
            let attr = schema.attribute(query.target.as_deref().expect("SUM has a target")).expect("validated");
            if let Domain::Numeric { lo, .. } = attr.domain {
                if lo < 0.0 {
                    notes.push("aggregate attribute may be negative; weighted-product bound skipped".into());
                    return Ok(Ok(None));
                }
            }
            CoverMode::Sum { a }
        }
        _ => {
            notes.push(format!("{} is not supported by the weighted-product bound", query.aggregate));
            return Ok(Ok(None));
        }
    };
    let sums = match summaries(graph, query, agg_rel, opts)? {
        Ok(s) => s,
        Err(r) => return Ok(Err(r)),
    };
    let terms: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(i, s)| match mode {
            CoverMode::Sum { a } if a == i => s.sum_upper.unwrap_or(0.0),
            _ => s.count_upper,
        })
        .collect();
    let n = graph.relations.len();
    if sums.iter().any(|s| s.count_upper <= 0.0) || terms.iter().any(|t| *t <= 0.0) {
        return Ok(Ok(Some((0.0, vec![1.0; n], sums))));
    }
    let cover = fec_lp(graph, &terms, mode)?;
    let upper = terms.iter().zip(&cover).map(|(t, c)| t.powf(*c)).product();
    Ok(Ok(Some((upper, cover, sums))))
}

/// Bounds an aggregate over the join with the chosen method.
pub fn join_bound(graph: &JoinGraph, query: &QuerySpec, method: JoinMethod, opts: &BoundOptions) -> Result<JoinOutcome> {
    let mut notes = Vec::new();
    let naive = match method {
        JoinMethod::Naive | JoinMethod::Best => Some(naive_join_bound(graph, query, opts)?),
        JoinMethod::Gwe => None,
    };
    if let Some(n) = &naive {
        if !n.is_bounded() {
            return Ok(JoinOutcome { range: n.clone(), method, cover: None, summaries: Vec::new(), naive_upper: None, gwe_upper: None });
        }
    }
    let gwe = match method {
        JoinMethod::Naive => None,
        _ => match gwe_upper(graph, query, opts, &mut notes)? {
            Ok(g) => g,
            Err(r) => return Ok(JoinOutcome { range: r, method, cover: None, summaries: Vec::new(), naive_upper: None, gwe_upper: None }),
        },
    };
    let naive_upper = naive.as_ref().and_then(|n| n.upper);
    let mut range = match (&naive, &gwe) {
        (Some(n), _) => n.clone(),
        (None, Some(_)) => ResultRange { lower: Some(0.0), ..ResultRange::with_status(Status::Exact) },
        (None, None) => naive_join_bound(graph, query, opts)?,
    };
    let (cover, summaries, gwe_value) = match gwe {
        Some((upper, cover, sums)) => {
            let capped = match naive_upper {
                Some(nu) if nu < upper => nu,
                _ => upper,
            };
            if capped < range.upper.unwrap_or(f64::INFINITY) || range.upper.is_none() {
                range.upper = Some(capped);
                range.witness_upper = None;
            }
            (Some(cover), sums, Some(upper))
        }
        None => (None, Vec::new(), None),
    };
    range.diagnostics.notes.extend(notes);
    Ok(JoinOutcome { range, method, cover, summaries, naive_upper, gwe_upper: gwe_value })
}

/// The library form of the cover bound: weighted product capped by the naive
/// upper bound, naive lower bound.
pub fn gwe_bound(graph: &JoinGraph, query: &QuerySpec, opts: &BoundOptions) -> Result<ResultRange> {
    join_bound(graph, query, JoinMethod::Best, opts).map(|o| o.range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Attribute;

    fn relation(name: &str, attrs: &[&str], ku: u64) -> JoinRelation {
        let schema = Schema::new(attrs.iter().map(|a| Attribute::numeric(*a, 0.0, 10.0)).collect()).unwrap();
        let pc = PredicateConstraint::new(format!("{name}0"), Predicate::always(), ValueConstraint::none(), Frequency::at_most(ku));
        JoinRelation { name: name.into(), pcs: PcSet::new(Arc::new(schema), vec![pc]).unwrap() }
    }

    fn count_query(names: &[&str]) -> QuerySpec {
        QuerySpec { relations: names.iter().map(|s| s.to_string()).collect(), ..QuerySpec::new(Aggregate::Count, None, "x") }
    }

    #[test]
    fn triangle_cover_is_half() {
        let g = JoinGraph::new(vec![relation("R", &["a", "b"], 100), relation("S", &["b", "c"], 100), relation("T", &["c", "a"], 100)])
            .unwrap()
            .with_distinct_rows(true);
        let c = fec_lp(&g, &[100.0; 3], CoverMode::Count).unwrap();
        for v in &c {
            assert!((v - 0.5).abs() < 1e-9, "{c:?}");
        }
        let out = join_bound(&g, &count_query(&["R", "S", "T"]), JoinMethod::Best, &BoundOptions::default()).unwrap();
        assert!((out.range.upper.unwrap() - 1000.0).abs() < 1e-6);
        assert_eq!(out.naive_upper, Some(1e6));
    }

    #[test]
    fn single_relation_cover() {
        let g = JoinGraph::new(vec![relation("R", &["a", "b"], 7)]).unwrap();
        assert_eq!(fec_lp(&g, &[7.0], CoverMode::Count).unwrap(), vec![1.0]);
    }

    #[test]
    fn disjoint_shared_ranges_drop_products() {
        let schema = Arc::new(Schema::new(vec![Attribute::numeric("k", 0.0, 10.0)]).unwrap());
        let pc = |id: &str, lo: f64, hi: f64| {
            PredicateConstraint::new(id, Predicate::range("k", Interval::closed(lo, hi)), ValueConstraint::none(), Frequency::at_most(3))
        };
        let left = PcSet::new(schema.clone(), vec![pc("l0", 0.0, 4.0), pc("l1", 5.0, 10.0)]).unwrap();
        let right = PcSet::new(schema, vec![pc("r0", 0.0, 2.0), pc("r1", 6.0, 10.0)]).unwrap();
        let g = JoinGraph::new(vec![JoinRelation { name: "L".into(), pcs: left }, JoinRelation { name: "R".into(), pcs: right }]).unwrap();
        let set = product_set(&g).unwrap();
        let ids: Vec<_> = set.constraints().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["l0*r0", "l1*r1"]);
    }
}

//! Result ranges for single-table aggregate queries.

mod drivers;
mod problem;

use std::sync::Arc;

use serde::Serialize;

use crate::decompose::{decompose_region, Cell, DecomposeOptions, DecomposeStats, Decomposition, VisitOrder};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::pc::{Closure, PcSet};
use crate::predicate::{conjoin, residual_pieces, Predicate, Region};
use crate::query::{Aggregate, QuerySpec};
use crate::schema::{Domain, Relation, Schema, Tuple};

pub use drivers::solve;
pub use problem::{Allocation, BoundProblem, Method, ProblemCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Exact,
    EarlyStopLoose,
    NotClosed,
    InfeasibleConstraints,
    NoRows,
}

/// Aggregates of the certain rows matching a query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Existing {
    pub count: u64,
    pub sum: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Existing {
    pub fn none() -> Self {
        Existing::default()
    }

    /// Summarizes the rows of `relation` inside `region`, aggregating
    /// attribute `attr` (`None` counts rows).
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a Vec<f64>>, region: &Region, attr: Option<usize>) -> Self {
        let mut e = Existing::none();
        for row in rows {
            if region.contains_encoded(row) {
                let v = attr.map_or(1.0, |a| row[a]);
                e.count += 1;
                e.sum += v;
                e.min = Some(e.min.map_or(v, |m: f64| m.min(v)));
                e.max = Some(e.max.map_or(v, |m: f64| m.max(v)));
            }
        }
        e
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub cells: usize,
    pub outside_cells: usize,
    pub decomposition: DecomposeStats,
    pub method: Option<Method>,
    pub solver_nodes: u64,
    pub probes: u32,
    /// True when some admissible instance has no row matching the query, in
    /// which case AVG/MIN/MAX are undefined for that instance.
    pub may_be_empty: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Reference to an allocation variable for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRef {
    pub covering: Vec<String>,
    pub inside: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRange {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: Status,
    pub witness_upper: Option<Vec<u64>>,
    pub witness_lower: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<serde_json::Value>,
    pub diagnostics: Diagnostics,
}

impl ResultRange {
    pub(crate) fn with_status(status: Status) -> Self {
        ResultRange {
            lower: None,
            upper: None,
            status,
            witness_upper: None,
            witness_lower: None,
            cells: Vec::new(),
            counterexample: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub(crate) fn degenerate(lower: f64, upper: f64) -> Self {
        ResultRange { lower: Some(lower), upper: Some(upper), ..ResultRange::with_status(Status::Exact) }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.status, Status::Exact | Status::EarlyStopLoose)
    }

    /// True when `value` lies in `[lower, upper]` up to `tol`.
    pub fn contains(&self, value: f64, tol: f64) -> bool {
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => lo - tol <= value && value <= hi + tol,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum BoundOutput {
    Single(ResultRange),
    Groups { groups: Vec<GroupRange> },
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRange {
    pub group: String,
    #[serde(flatten)]
    pub range: ResultRange,
}

impl BoundOutput {
    pub fn single(&self) -> Option<&ResultRange> {
        match self {
            BoundOutput::Single(r) => Some(r),
            BoundOutput::Groups { .. } => None,
        }
    }

    pub fn ranges(&self) -> Vec<&ResultRange> {
        match self {
            BoundOutput::Single(r) => vec![r],
            BoundOutput::Groups { groups } => groups.iter().map(|g| &g.range).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    pub early_stop_depth: Option<usize>,
    pub parallelism: Parallelism,
    pub order: VisitOrder,
    /// AVG binary-search tolerance relative to the value range width.
    pub avg_tolerance: f64,
    /// Use the per-constraint path when the predicates are pairwise disjoint.
    pub disjoint_fast_path: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            early_stop_depth: None,
            parallelism: Parallelism::Parallel,
            order: VisitOrder::ListOrder,
            avg_tolerance: 1e-6,
            disjoint_fast_path: true,
        }
    }
}

impl BoundOptions {
    fn decompose_options(&self) -> DecomposeOptions {
        DecomposeOptions { early_stop_depth: self.early_stop_depth, parallelism: self.parallelism, order: self.order }
    }
}

/// Bounds `query` over the missing rows described by `set`, combined with the
/// certain rows in `existing`.
pub fn bound_query(query: &QuerySpec, set: &PcSet, existing: Option<&Relation>, opts: &BoundOptions) -> Result<BoundOutput> {
    let schema = set.schema();
    query.validate(schema)?;
    let rows = match existing {
        Some(rel) => {
            if **rel.schema() != **schema {
                return Err(Error::schema("existing rows use a different schema than the constraints"));
            }
            rel.encoded()
        }
        None => Vec::new(),
    };
    let agg_attr = aggregated_attribute(query, schema)?;

    let Some(group) = &query.group_by else {
        return Ok(BoundOutput::Single(bound_region(query.aggregate, agg_attr, query.predicate.as_ref(), set, &rows, opts)?));
    };
    let Domain::Categorical { values } = &schema.attribute(group).expect("validated").domain else { unreachable!("validated") };
    let ranges = par::map(opts.parallelism, values, |v| {
        let pred = query.predicate.as_ref().and_then(|p| conjoin(p, &Predicate::member(group.as_str(), [v.as_str()])));
        bound_region(query.aggregate, agg_attr, pred.as_ref(), set, &rows, opts)
    });
    let groups = values.iter().zip(ranges).map(|(v, r)| r.map(|range| GroupRange { group: v.clone(), range })).collect::<Result<_>>()?;
    Ok(BoundOutput::Groups { groups })
}

/// Bounds one aggregate over the region `predicate` (`None` = empty region).
pub fn bound_region(
    agg: Aggregate,
    agg_attr: Option<usize>,
    predicate: Option<&Predicate>,
    set: &PcSet,
    existing_rows: &[Vec<f64>],
    opts: &BoundOptions,
) -> Result<ResultRange> {
    let schema = set.schema();
    let clip = match predicate {
        Some(p) => p.to_region(schema)?,
        None => Region::empty(schema),
    };
    let existing = Existing::from_rows(existing_rows, &clip, agg_attr);
    bound_clipped(agg, agg_attr, &clip, set, &existing, opts)
}

/// [`bound_region`] over an already compiled region with the certain rows
/// already summarized.
pub fn bound_clipped(
    agg: Aggregate,
    agg_attr: Option<usize>,
    clip: &Region,
    set: &PcSet,
    existing: &Existing,
    opts: &BoundOptions,
) -> Result<ResultRange> {
    let schema = set.schema();
    if !clip.is_empty() {
        if let Closure::Counterexample(t) = set.closure_in(clip) {
            let mut r = ResultRange::with_status(Status::NotClosed);
            r.counterexample = Some(t.to_json(schema));
            return Ok(r);
        }
    }
    let decomposition = if opts.disjoint_fast_path && opts.early_stop_depth.is_none() && set.is_pairwise_disjoint() {
        disjoint_cells(set, clip)
    } else {
        decompose_region(set, clip, &opts.decompose_options())
    };
    Ok(finish(agg, agg_attr, set, &decomposition, existing, opts))
}

fn finish(
    agg: Aggregate,
    agg_attr: Option<usize>,
    set: &PcSet,
    decomposition: &Decomposition,
    existing: &Existing,
    opts: &BoundOptions,
) -> ResultRange {
    let problem = BoundProblem::build(decomposition, set, agg_attr);
    let mut range = solve(&problem, agg, existing, opts.avg_tolerance);
    if range.status == Status::Exact && !decomposition.is_exact() {
        range.status = Status::EarlyStopLoose;
    }
    range.cells = problem
        .cells
        .iter()
        .map(|c| CellRef { covering: c.covering.iter().map(|&j| set.get(j).id.clone()).collect(), inside: c.inside })
        .collect();
    range.diagnostics.cells = decomposition.cells.len();
    range.diagnostics.outside_cells = decomposition.outside.len();
    range.diagnostics.decomposition = decomposition.stats.clone();
    range
}

/// Per-constraint SUM/COUNT path for pairwise-disjoint predicates: every
/// constraint contributes `k_u · h` to the upper and `k_l · l` to the lower
/// bound. Fails with `NotDisjoint` when two predicates overlap.
pub fn greedy_disjoint(set: &PcSet, query: &QuerySpec) -> Result<ResultRange> {
    if let Some((i, j)) = set.overlapping_pair() {
        return Err(Error::NotDisjoint(set.get(i).id.clone(), set.get(j).id.clone()));
    }
    query.validate(set.schema())?;
    let agg_attr = aggregated_attribute(query, set.schema())?;
    let clip = match &query.predicate {
        Some(p) => p.to_region(set.schema())?,
        None => Region::empty(set.schema()),
    };
    if !clip.is_empty() {
        if let Closure::Counterexample(t) = set.closure_in(&clip) {
            let mut r = ResultRange::with_status(Status::NotClosed);
            r.counterexample = Some(t.to_json(set.schema()));
            return Ok(r);
        }
    }
    let d = disjoint_cells(set, &clip);
    Ok(finish(query.aggregate, agg_attr, set, &d, &Existing::none(), &BoundOptions::default()))
}

/// Cells of a pairwise-disjoint set: one per predicate meeting the clip, and
/// one outside part per predicate with a positive lower window.
fn disjoint_cells(set: &PcSet, clip: &Region) -> Decomposition {
    let n = set.len();
    let mut cells = Vec::new();
    let mut outside = Vec::new();
    for j in 0..n {
        let region = set.region(j);
        let nu = set.nu_region(j);
        let mut signature = vec![false; n];
        signature[j] = true;
        let inside = region.intersect(clip);
        if !inside.is_empty() {
            let placeable = inside.intersect(nu);
            let pieces = if placeable.is_empty() { Vec::new() } else { vec![placeable] };
            cells.push(Cell { signature: signature.clone(), covering: vec![j], inside: true, verified: true, pieces });
        }
        if set.get(j).kappa.kl > 0 {
            let rest = residual_pieces(&region.intersect(nu), &[clip]);
            if !region.is_within(clip) {
                outside.push(Cell { signature, covering: vec![j], inside: false, verified: true, pieces: rest });
            }
        }
    }
    Decomposition { cells, outside, stats: DecomposeStats::default() }
}

/// Materializes an allocation as concrete rows: `x[i]` copies of a point in
/// cell `i`, with the aggregated attribute at its upper (or lower) end.
pub fn materialize(decomposition: &Decomposition, x: &[u64], agg_attr: Option<usize>, upper: bool, schema: &Arc<Schema>) -> Vec<Tuple> {
    let mut rows = Vec::new();
    for (cell, &k) in decomposition.all_cells().zip(x) {
        if k == 0 {
            continue;
        }
        let point = match agg_attr {
            Some(a) => cell.extreme_point(a, upper),
            None => cell.pieces.first().map(Region::representative),
        }
        .expect("allocated cells have room for rows");
        let t = schema.decode(&point);
        rows.extend(std::iter::repeat_n(t, k as usize));
    }
    rows
}

/// Schema index of the aggregated attribute; `None` for COUNT.
fn aggregated_attribute(query: &QuerySpec, schema: &Schema) -> Result<Option<usize>> {
    match (&query.aggregate, &query.target) {
        (Aggregate::Count, _) | (_, None) => Ok(None),
        (_, Some(t)) => schema.require(t).map(Some),
    }
}

//! Aggregate drivers over a [`BoundProblem`].

use super::problem::{Allocation, BoundProblem, Extras};
use super::{Existing, ResultRange, Status};
use crate::query::Aggregate;

const MAX_PROBES: u32 = 64;

/// Bounds `agg` over the allocation problem combined with existing rows.
pub fn solve(problem: &BoundProblem, agg: Aggregate, existing: &Existing, avg_tolerance: f64) -> ResultRange {
    let mut out = match agg {
        Aggregate::Sum | Aggregate::Count => additive(problem, existing),
        Aggregate::Avg => average(problem, existing, avg_tolerance),
        Aggregate::Max => extreme(problem, existing, false),
        Aggregate::Min => extreme(problem, existing, true),
    };
    if matches!(agg, Aggregate::Avg | Aggregate::Min | Aggregate::Max) && out.is_bounded() {
        out.diagnostics.may_be_empty = existing.count == 0 && {
            let ex = Extras { exclude: problem.cells.iter().map(|c| c.inside).collect(), ..Default::default() };
            problem.feasible(&ex).is_some()
        };
    }
    out
}

struct Tally {
    nodes: u64,
    probes: u32,
    method: Option<super::Method>,
}

impl Tally {
    fn new() -> Self {
        Tally { nodes: 0, probes: 0, method: None }
    }

    fn note(&mut self, a: Option<Allocation>) -> Option<Allocation> {
        if let Some(a) = &a {
            self.nodes += a.nodes;
            self.method = Some(a.method);
        }
        self.probes += 1;
        a
    }

    fn apply(self, r: &mut ResultRange) {
        r.diagnostics.solver_nodes = self.nodes;
        r.diagnostics.probes = self.probes;
        r.diagnostics.method = self.method;
    }
}

fn inside_weights(problem: &BoundProblem, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    problem.cells.iter().map(|c| if c.inside && !c.forced_zero { f(c.lower, c.upper) } else { 0.0 }).collect()
}

impl BoundProblem {
    /// Largest SUM of the aggregated attribute over the query region.
    pub fn max_sum(&self) -> Option<Allocation> {
        self.allocate(&inside_weights(self, |_, hi| hi), &Extras::default())
    }

    /// Smallest SUM; zero without solving when no row is forced and no value
    /// can be negative.
    pub fn min_sum(&self) -> Option<Allocation> {
        let no_forced_rows = self.windows.iter().all(|w| w.kl == 0);
        let nonnegative = self.cells.iter().all(|c| !c.inside || c.forced_zero || c.lower >= 0.0);
        if no_forced_rows && nonnegative {
            return Some(Allocation { value: 0.0, x: vec![0; self.cells.len()], nodes: 0, method: super::Method::Separable });
        }
        let mut a = self.allocate(&inside_weights(self, |lo, _| -lo), &Extras::default())?;
        a.value = -a.value;
        Some(a)
    }
}

fn additive(problem: &BoundProblem, existing: &Existing) -> ResultRange {
    let mut tally = Tally::new();
    let (Some(hi), Some(lo)) = (tally.note(problem.max_sum()), tally.note(problem.min_sum())) else {
        let mut r = ResultRange::with_status(Status::InfeasibleConstraints);
        tally.apply(&mut r);
        return r;
    };
    let mut r = ResultRange::degenerate(lo.value + existing.sum, hi.value + existing.sum);
    r.witness_upper = Some(hi.x);
    r.witness_lower = Some(lo.x);
    tally.apply(&mut r);
    r
}

/// Status when the side conditions of a driver cannot be met: either the
/// windows themselves conflict or only empty answers are possible.
fn unmet(problem: &BoundProblem, tally: &mut Tally) -> Status {
    if tally.note(problem.feasible(&Extras::default())).is_none() {
        Status::InfeasibleConstraints
    } else {
        Status::NoRows
    }
}

fn average(problem: &BoundProblem, existing: &Existing, tol: f64) -> ResultRange {
    let mut tally = Tally::new();
    let upper = avg_sup(problem, &inside_weights(problem, |_, hi| hi), existing.sum, existing.count, tol, &mut tally);
    let lower = avg_sup(problem, &inside_weights(problem, |lo, _| -lo), -existing.sum, existing.count, tol, &mut tally);
    let (Some((hi, wu)), Some((neg_lo, wl))) = (upper, lower) else {
        let mut r = ResultRange::with_status(unmet(problem, &mut tally));
        tally.apply(&mut r);
        return r;
    };
    let mut r = ResultRange::degenerate(-neg_lo, hi);
    r.witness_upper = Some(wu);
    r.witness_lower = Some(wl);
    tally.apply(&mut r);
    r
}

/// Supremum over admissible instances of `(s + Σ v_i X_i) / (c + Σ X_i)`,
/// found by bisection on `r` with the test `max Σ X_i (v_i - r) + s - r·c >= 0`.
/// Returns the average realized by the final witness.
fn avg_sup(problem: &BoundProblem, v: &[f64], s: f64, c: u64, tol: f64, tally: &mut Tally) -> Option<(f64, Vec<u64>)> {
    let ex = Extras { min_inside: c == 0, ..Default::default() };
    let allowed: Vec<usize> = (0..v.len()).filter(|&i| problem.cells[i].inside && !problem.cells[i].forced_zero).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &i in &allowed {
        lo = lo.min(v[i]);
        hi = hi.max(v[i]);
    }
    if c > 0 {
        let mean = s / c as f64;
        lo = lo.min(mean);
        hi = hi.max(mean);
    }
    if !lo.is_finite() {
        return None;
    }
    let ratio = |a: &Allocation| {
        let (num, den) = allowed.iter().fold((s, c as f64), |(n, d), &i| (n + v[i] * a.x[i] as f64, d + a.x[i] as f64));
        num / den
    };
    let probe = |r: f64, tally: &mut Tally| {
        let w: Vec<f64> =
            (0..v.len()).map(|i| if problem.cells[i].inside && !problem.cells[i].forced_zero { v[i] - r } else { 0.0 }).collect();
        tally.note(problem.allocate(&w, &ex)).map(|a| {
            let slack = a.value + s - r * c as f64;
            (slack >= -1e-9 * (1.0 + r.abs()), a)
        })
    };
    let (_, mut witness) = probe(lo, tally)?;
    let width = tol * (hi - lo);
    let mut iters = 0;
    while hi - lo > width && iters < MAX_PROBES {
        let mid = lo / 2.0 + hi / 2.0;
        let (ok, a) = probe(mid, tally)?;
        if ok {
            lo = mid;
            witness = a;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    Some((ratio(&witness), witness.x))
}

/// MAX (or MIN when `negate`): the upper end is the best value whose cell
/// can hold a row; the lower end is the smallest threshold such that every
/// row can stay at or below it.
fn extreme(problem: &BoundProblem, existing: &Existing, negate: bool) -> ResultRange {
    let high: Vec<f64> = problem.cells.iter().map(|c| if negate { -c.lower } else { c.upper }).collect();
    let low: Vec<f64> = problem.cells.iter().map(|c| if negate { -c.upper } else { c.lower }).collect();
    let ex_best = if negate { existing.min.map(|m| -m) } else { existing.max };
    let mut tally = Tally::new();

    let candidates: Vec<usize> = {
        let mut c: Vec<usize> = (0..problem.num_cells()).filter(|&i| problem.cells[i].inside && !problem.cells[i].forced_zero).collect();
        c.sort_by(|&a, &b| high[b].total_cmp(&high[a]).then(a.cmp(&b)));
        c
    };

    // Upper end.
    let mut sup = None;
    for &i in &candidates {
        if ex_best.is_some_and(|e| e >= high[i]) {
            break;
        }
        if let Some(a) = tally.note(problem.feasible(&Extras { require: Some(i), ..Default::default() })) {
            sup = Some((high[i], a.x));
            break;
        }
    }
    let sup = match (sup, ex_best) {
        (Some(s), _) => Some(s),
        (None, Some(e)) => tally.note(problem.feasible(&Extras::default())).map(|a| (e, a.x)),
        (None, None) => None,
    };

    // Lower end: bisection over candidate thresholds.
    let mut thresholds: Vec<f64> = candidates.iter().map(|&i| low[i]).chain(ex_best).filter(|t| ex_best.is_none_or(|e| *t >= e)).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let test = |t: f64, tally: &mut Tally| {
        let exclude = (0..problem.num_cells()).map(|i| problem.cells[i].inside && low[i] > t).collect();
        tally.note(problem.feasible(&Extras { min_inside: existing.count == 0, exclude, require: None }))
    };
    let mut inf = None;
    let (mut a, mut b) = (0usize, thresholds.len());
    while a < b {
        let mid = (a + b) / 2;
        match test(thresholds[mid], &mut tally) {
            Some(alloc) => {
                inf = Some((thresholds[mid], alloc.x));
                b = mid;
            }
            None => a = mid + 1,
        }
    }

    let mut r = match (sup, inf) {
        (Some((hi, wu)), Some((lo, wl))) => {
            let (lower, upper) = if negate { (-hi, -lo) } else { (lo, hi) };
            let mut r = ResultRange::degenerate(lower, upper);
            if negate {
                r.witness_lower = Some(wu);
                r.witness_upper = Some(wl);
            } else {
                r.witness_upper = Some(wu);
                r.witness_lower = Some(wl);
            }
            r
        }
        _ => ResultRange::with_status(unmet(problem, &mut tally)),
    };
    tally.apply(&mut r);
    r
}

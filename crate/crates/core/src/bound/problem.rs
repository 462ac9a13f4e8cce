//! The allocation problem: integer row counts per cell under the
//! per-constraint cardinality windows.

use serde::Serialize;

use crate::decompose::{Cell, Decomposition};
use crate::opt::{solve_milp, Cmp, LinearProgram, MilpProgram, Sense};
use crate::pc::{Frequency, PcSet};

/// One allocation variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCell {
    pub covering: Vec<usize>,
    pub inside: bool,
    pub forced_zero: bool,
    /// Reconciled range of the aggregate attribute (1 for COUNT).
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct BoundProblem {
    pub cells: Vec<ProblemCell>,
    pub windows: Vec<Frequency>,
    /// `members[j]` lists the cells covered by constraint `j`.
    pub members: Vec<Vec<usize>>,
    separable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Separable,
    Milp,
}

/// Side conditions layered over the windows.
#[derive(Debug, Clone, Default)]
pub(crate) struct Extras {
    /// At least one row inside the query region.
    pub min_inside: bool,
    /// At least one row in this cell.
    pub require: Option<usize>,
    /// Cells that must stay empty.
    pub exclude: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub value: f64,
    pub x: Vec<u64>,
    pub nodes: u64,
    pub method: Method,
}

impl BoundProblem {
    /// Builds the problem over a decomposition. `agg_attr` is the schema
    /// index of the aggregated attribute, `None` for COUNT.
    pub fn build(decomposition: &Decomposition, set: &PcSet, agg_attr: Option<usize>) -> BoundProblem {
        let cells = decomposition.all_cells().map(|c| problem_cell(c, agg_attr)).collect();
        BoundProblem::from_cells(cells, set.constraints().iter().map(|pc| pc.kappa).collect())
    }

    pub fn from_cells(cells: Vec<ProblemCell>, windows: Vec<Frequency>) -> BoundProblem {
        let mut members = vec![Vec::new(); windows.len()];
        for (i, c) in cells.iter().enumerate() {
            for &j in &c.covering {
                members[j].push(i);
            }
        }
        let separable = cells.iter().all(|c| c.covering.len() == 1);
        BoundProblem { cells, windows, members, separable }
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn allowed(&self, i: usize, ex: &Extras) -> bool {
        !self.cells[i].forced_zero && !ex.exclude.get(i).copied().unwrap_or(false)
    }

    /// Maximizes `Σ w_i X_i` over integer allocations; `None` when the
    /// windows (with the extras) admit no allocation.
    pub(crate) fn allocate(&self, w: &[f64], ex: &Extras) -> Option<Allocation> {
        if let Some(r) = ex.require {
            if !self.allowed(r, ex) {
                return None;
            }
        }
        let out = if self.separable { self.allocate_separable(w, ex) } else { self.allocate_milp(w, ex) }?;
        Some(out)
    }

    pub(crate) fn feasible(&self, ex: &Extras) -> Option<Allocation> {
        self.allocate(&vec![0.0; self.cells.len()], ex)
    }

    fn allocate_milp(&self, w: &[f64], ex: &Extras) -> Option<Allocation> {
        let n = self.cells.len();
        let mut lp = LinearProgram::new(Sense::Max, w.to_vec());
        for i in 0..n {
            if !self.allowed(i, ex) {
                lp.bounds[i] = (0.0, 0.0);
            }
        }
        if let Some(r) = ex.require {
            lp.bounds[r].0 = 1.0;
        }
        for (j, win) in self.windows.iter().enumerate() {
            let vars = &self.members[j];
            if win.kl == win.ku {
                lp.add_sum(vars, Cmp::Eq, win.kl as f64);
            } else {
                if win.kl > 0 {
                    lp.add_sum(vars, Cmp::Ge, win.kl as f64);
                }
                lp.add_sum(vars, Cmp::Le, win.ku as f64);
            }
        }
        if ex.min_inside {
            let inside: Vec<usize> = (0..n).filter(|&i| self.cells[i].inside).collect();
            lp.add_sum(&inside, Cmp::Ge, 1.0);
        }
        let out = solve_milp(&MilpProgram::all_integer(lp));
        if !out.is_optimal() {
            return None;
        }
        let x: Vec<u64> = out.x.iter().map(|v| v.round().max(0.0) as u64).collect();
        Some(Allocation { value: dot(w, &x), x, nodes: out.nodes, method: Method::Milp })
    }

    /// Every cell sits in exactly one window, so windows are solved one at a
    /// time: all rows go to the best cell, as many as allowed when it pays.
    fn allocate_separable(&self, w: &[f64], ex: &Extras) -> Option<Allocation> {
        let n = self.cells.len();
        let mut x = vec![0u64; n];
        let mut plans = Vec::with_capacity(self.windows.len());
        for j in 0..self.windows.len() {
            let forced = ex.require.filter(|r| self.cells[*r].covering[0] == j);
            let plan = self.window_best(j, w, ex, forced)?;
            plans.push(plan);
        }
        let has_inside = |plan: &WindowPlan| plan.rows.iter().any(|(i, k)| *k > 0 && self.cells[*i].inside);
        if ex.min_inside && !plans.iter().any(has_inside) {
            let mut best: Option<(f64, usize, WindowPlan)> = None;
            for (j, current) in plans.iter().enumerate() {
                let Some(f) = self.best_inside(j, w, ex) else { continue };
                let Some(plan) = self.window_best(j, w, ex, Some(f)) else { continue };
                let loss = current.value - plan.value;
                if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
                    best = Some((loss, j, plan));
                }
            }
            let (_, j, plan) = best?;
            plans[j] = plan;
        }
        for plan in &plans {
            for &(i, k) in &plan.rows {
                x[i] += k;
            }
        }
        Some(Allocation { value: dot(w, &x), x, nodes: 0, method: Method::Separable })
    }

    fn best_inside(&self, j: usize, w: &[f64], ex: &Extras) -> Option<usize> {
        self.members[j].iter().copied().filter(|&i| self.cells[i].inside && self.allowed(i, ex)).fold(None, |acc: Option<usize>, i| {
            match acc {
                Some(b) if w[b] >= w[i] => Some(b),
                _ => Some(i),
            }
        })
    }

    fn window_best(&self, j: usize, w: &[f64], ex: &Extras, forced: Option<usize>) -> Option<WindowPlan> {
        let Frequency { kl, ku } = self.windows[j];
        let best = self.members[j].iter().copied().filter(|&i| self.allowed(i, ex)).fold(None, |acc: Option<usize>, i| match acc {
            Some(b) if w[b] >= w[i] => Some(b),
            _ => Some(i),
        });
        match (best, forced) {
            (None, _) => (kl == 0).then(|| WindowPlan { value: 0.0, rows: Vec::new() }),
            (Some(m), None) => {
                let count = if w[m] > 0.0 { ku } else { kl };
                Some(WindowPlan { value: count as f64 * w[m], rows: vec![(m, count)] })
            }
            (Some(m), Some(f)) => {
                if ku == 0 {
                    return None;
                }
                let count = if w[m] > 0.0 { ku } else { kl.max(1) };
                Some(WindowPlan { value: w[f] + (count - 1) as f64 * w[m], rows: vec![(f, 1), (m, count - 1)] })
            }
        }
    }
}

struct WindowPlan {
    value: f64,
    rows: Vec<(usize, u64)>,
}

fn dot(w: &[f64], x: &[u64]) -> f64 {
    w.iter().zip(x).filter(|(_, k)| **k > 0).map(|(a, k)| a * *k as f64).sum()
}

pub(crate) fn problem_cell(c: &Cell, agg_attr: Option<usize>) -> ProblemCell {
    let (lower, upper) = match (c.forced_zero(), agg_attr) {
        (true, _) => (0.0, 0.0),
        (false, None) => (1.0, 1.0),
        (false, Some(a)) => {
            let r = c.value_range(a).expect("numeric attribute");
            (r.lo, r.hi)
        }
    };
    ProblemCell { covering: c.covering.clone(), inside: c.inside, forced_zero: c.forced_zero(), lower, upper }
}

//! Dense simplex and branch-and-bound, sized for the few hundred variables
//! that cell allocations and cover LPs produce.

mod lp;
mod milp;

pub use lp::solve_lp;
pub use milp::solve_milp;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `[lo, hi]`; `lo` must be finite, `hi` may be `+inf`.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Nonnegative, unbounded-above variables.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    /// Adds `Σ_{i ∈ vars} x_i  cmp  rhs`.
    pub fn add_sum(&mut self, vars: &[usize], cmp: Cmp, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &v in vars {
            coeffs[v] += 1.0;
        }
        self.add(coeffs, cmp, rhs);
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or variable bound at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            match c.cmp {
                Cmp::Le => (lhs - c.rhs).max(0.0),
                Cmp::Ge => (c.rhs - lhs).max(0.0),
                Cmp::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.bounds.iter().zip(x).map(|((lo, hi), v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProgram {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
}

impl MilpProgram {
    pub fn all_integer(lp: LinearProgram) -> Self {
        let n = lp.num_vars();
        MilpProgram { lp, integer: vec![true; n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub nodes: u64,
}

impl SolveOutcome {
    fn without_point(status: SolveStatus, nodes: u64) -> Self {
        let objective = match status {
            SolveStatus::Unbounded => f64::INFINITY,
            _ => f64::NAN,
        };
        SolveOutcome { status, objective, x: Vec::new(), nodes }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub const PIVOT_TOL: f64 = 1e-9;
pub const INTEGRALITY_TOL: f64 = 1e-6;

use super::{Cmp, Constraint, LinearProgram, Sense, SolveOutcome, SolveStatus, PIVOT_TOL};

/// Two-phase dense tableau simplex with Bland's rule.
pub fn solve_lp(lp: &LinearProgram) -> SolveOutcome {
    solve_standard(lp).0
}

/// `lp` shifted to `y = x - lo` over its free variables, rows that mention
/// no free variable already checked.
struct Standard {
    free: Vec<usize>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
    cost: Vec<f64>,
}

fn standardize(lp: &LinearProgram) -> Result<Standard, SolveStatus> {
    let n = lp.num_vars();
    if lp.bounds.iter().any(|(lo, hi)| lo > hi) {
        return Err(SolveStatus::Infeasible);
    }
    let sign = if lp.sense == Sense::Max { 1.0 } else { -1.0 };

    // Fixed variables drop out entirely.
    let free: Vec<usize> = (0..n).filter(|&i| lp.bounds[i].0 < lp.bounds[i].1).collect();
    let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(lp.constraints.len() + free.len());
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(&lp.bounds).map(|(a, (lo, _))| a * lo).sum();
        rows.push((free.iter().map(|&i| c.coeffs[i]).collect(), c.cmp, c.rhs - shift));
    }
    for (k, &i) in free.iter().enumerate() {
        let (lo, hi) = lp.bounds[i];
        if hi.is_finite() {
            let mut coeffs = vec![0.0; free.len()];
            coeffs[k] = 1.0;
            rows.push((coeffs, Cmp::Le, hi - lo));
        }
    }
    let mut kept = Vec::with_capacity(rows.len());
    for (coeffs, cmp, rhs) in rows {
        if coeffs.iter().all(|a| *a == 0.0) {
            let ok = match cmp {
                Cmp::Le => rhs >= -1e-9,
                Cmp::Ge => rhs <= 1e-9,
                Cmp::Eq => rhs.abs() <= 1e-9,
            };
            if !ok {
                return Err(SolveStatus::Infeasible);
            }
        } else {
            kept.push((coeffs, cmp, rhs));
        }
    }
    let cost = free.iter().map(|&i| sign * lp.objective[i]).collect();
    Ok(Standard { free, rows: kept, cost })
}

fn solve_standard(lp: &LinearProgram) -> (SolveOutcome, Option<(Standard, Tableau)>) {
    let std = match standardize(lp) {
        Ok(s) => s,
        Err(status) => return (SolveOutcome::without_point(status, 0), None),
    };
    match Tableau::solve(&std.rows, &std.cost) {
        Ok((y, t)) => {
            let mut x: Vec<f64> = lp.bounds.iter().map(|(lo, _)| *lo).collect();
            for (k, &i) in std.free.iter().enumerate() {
                x[i] += y[k];
            }
            (SolveOutcome { status: SolveStatus::Optimal, objective: lp.objective_at(&x), x, nodes: 1 }, Some((std, t)))
        }
        Err(status) => (SolveOutcome::without_point(status, 1), None),
    }
}

/// Solves the relaxation and reads Gomory mixed-integer cuts off the rows
/// of the optimal tableau whose basic integer variable is fractional, most
/// fractional first. Every cut is valid for all integer-feasible points and
/// violated by the returned relaxed point.
pub(crate) fn gomory_cuts(lp: &LinearProgram, integer: &[bool], max_cuts: usize) -> (SolveOutcome, Vec<Constraint>) {
    let (out, solved) = solve_standard(lp);
    let Some((std, t)) = solved else { return (out, Vec::new()) };
    let n = std.free.len();
    let whole = |v: f64| (v - v.round()).abs() <= 1e-9;
    let int_y: Vec<bool> = std.free.iter().map(|&i| integer[i] && whole(lp.bounds[i].0)).collect();
    // Slack columns follow the structural ones, one per inequality row.
    let slack_rows: Vec<usize> = (0..std.rows.len()).filter(|&r| std.rows[r].1 != Cmp::Eq).collect();
    let int_slack: Vec<bool> = slack_rows
        .iter()
        .map(|&r| {
            let (coeffs, _, rhs) = &std.rows[r];
            whole(*rhs) && coeffs.iter().zip(&int_y).all(|(a, int)| *a == 0.0 || (*int && whole(*a)))
        })
        .collect();
    let first_art = n + slack_rows.len();
    let basic: Vec<bool> = {
        let mut b = vec![false; t.cols];
        t.basis.iter().for_each(|&j| b[j] = true);
        b
    };

    let mut candidates: Vec<(f64, usize)> = (0..t.basis.len())
        .filter(|&i| t.basis[i] < n && int_y[t.basis[i]])
        .map(|i| (t.b[i] - t.b[i].floor(), i))
        .filter(|(f0, _)| (0.01..=0.99).contains(f0))
        .collect();
    candidates.sort_by(|a, b| (a.0 - 0.5).abs().total_cmp(&(b.0 - 0.5).abs()).then(a.1.cmp(&b.1)));

    let mut cuts = Vec::new();
    for &(f0, i) in candidates.iter().take(max_cuts) {
        // Σ g_j z_j >= 1 over nonbasic columns, then z rewritten in y.
        let mut coef = vec![0.0; n];
        let mut constant = 0.0;
        for j in (0..first_art).filter(|&j| !basic[j]) {
            let a = t.a[i][j];
            if a.abs() < 1e-12 {
                continue;
            }
            let integral = if j < n { int_y[j] } else { int_slack[j - n] };
            let g = if integral {
                let f = a - a.floor();
                if f <= f0 {
                    f / f0
                } else {
                    (1.0 - f) / (1.0 - f0)
                }
            } else if a >= 0.0 {
                a / f0
            } else {
                -a / (1.0 - f0)
            };
            if g == 0.0 {
                continue;
            }
            if j < n {
                coef[j] += g;
            } else {
                let (coeffs, cmp, rhs) = &std.rows[slack_rows[j - n]];
                let sign = if *cmp == Cmp::Le { -1.0 } else { 1.0 };
                coef.iter_mut().zip(coeffs).for_each(|(c, a)| *c += sign * g * a);
                constant -= sign * g * rhs;
            }
        }
        let nonzero: Vec<f64> = coef.iter().map(|c| c.abs()).filter(|c| *c > 1e-9).collect();
        let (lo, hi) = nonzero.iter().fold((f64::INFINITY, 0.0f64), |(l, h), c| (l.min(*c), h.max(*c)));
        if nonzero.is_empty() || hi / lo > 1e6 {
            continue;
        }
        let mut coeffs = vec![0.0; lp.num_vars()];
        let mut rhs = 1.0 - constant;
        for (k, &v) in std.free.iter().enumerate() {
            if coef[k].abs() > 1e-9 {
                coeffs[v] = coef[k];
                rhs += coef[k] * lp.bounds[v].0;
            }
        }
        // Back off slightly so rounding error never removes an integer point.
        rhs -= 1e-7 * (1.0 + rhs.abs());
        let lhs: f64 = coeffs.iter().zip(&out.x).map(|(a, v)| a * v).sum();
        if lhs < rhs - 1e-6 {
            cuts.push(Constraint { coeffs, cmp: Cmp::Ge, rhs });
        }
    }
    (out, cuts)
}

struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

const MAX_PIVOTS: usize = 1_000_000;

impl Tableau {
    /// Maximizes `cost · y` over `y >= 0` subject to `rows`.
    fn solve(rows: &[(Vec<f64>, Cmp, f64)], cost: &[f64]) -> Result<(Vec<f64>, Tableau), SolveStatus> {
        let n = cost.len();
        let m = rows.len();
        let slacks = rows.iter().filter(|(_, c, _)| *c != Cmp::Eq).count();
        let artificials =
            rows.iter().filter(|(_, c, r)| matches!((c, *r >= 0.0), (Cmp::Eq, _) | (Cmp::Ge, true) | (Cmp::Le, false))).count();
        let cols = n + slacks + artificials;
        let mut t = Tableau { a: Vec::with_capacity(m), b: Vec::with_capacity(m), basis: Vec::with_capacity(m), cols };
        let (mut next_slack, mut next_art) = (n, n + slacks);
        for (coeffs, cmp, rhs) in rows {
            let mut row = vec![0.0; cols];
            row[..n].copy_from_slice(coeffs);
            let mut rhs = *rhs;
            let mut slack_col = None;
            if *cmp != Cmp::Eq {
                row[next_slack] = if *cmp == Cmp::Le { 1.0 } else { -1.0 };
                slack_col = Some(next_slack);
                next_slack += 1;
            }
            if rhs < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            let basic = match slack_col {
                Some(s) if row[s] > 0.0 => s,
                _ => {
                    row[next_art] = 1.0;
                    next_art += 1;
                    next_art - 1
                }
            };
            t.a.push(row);
            t.b.push(rhs);
            t.basis.push(basic);
        }

        let first_art = n + slacks;
        if artificials > 0 {
            let mut phase1 = vec![0.0; cols];
            phase1[first_art..].iter_mut().for_each(|c| *c = -1.0);
            t.optimize(&phase1, cols)?;
            let infeasibility: f64 = t.basis.iter().zip(&t.b).filter(|(j, _)| **j >= first_art).map(|(_, v)| *v).sum();
            if infeasibility > 1e-7 {
                return Err(SolveStatus::Infeasible);
            }
            t.drive_out_artificials(first_art);
        }
        let mut phase2 = vec![0.0; cols];
        phase2[..n].copy_from_slice(cost);
        t.optimize(&phase2, first_art)?;

        let mut y = vec![0.0; n];
        for (i, &j) in t.basis.iter().enumerate() {
            if j < n {
                y[j] = t.b[i].max(0.0);
            }
        }
        Ok((y, t))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        self.a[r].iter_mut().for_each(|v| *v /= p);
        self.b[r] /= p;
        let pivot_row = self.a[r].clone();
        let pivot_b = self.b[r];
        for i in 0..self.a.len() {
            if i == r {
                continue;
            }
            let f = self.a[i][c];
            if f != 0.0 {
                for (v, pv) in self.a[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.b[i] -= f * pivot_b;
                if self.b[i].abs() < 1e-12 {
                    self.b[i] = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over columns `< allowed`, Bland's rule throughout.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(), SolveStatus> {
        let mut reduced: Vec<f64> = cost.to_vec();
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                for (r, v) in reduced.iter_mut().zip(&self.a[i]) {
                    *r -= cb * v;
                }
            }
        }
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| reduced[j] > PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let aij = self.a[i][enter];
                if aij > PIVOT_TOL {
                    let ratio = self.b[i] / aij;
                    leave = match leave {
                        Some((l, best)) if ratio > best || (ratio == best && self.basis[i] > self.basis[l]) => Some((l, best)),
                        _ => Some((i, ratio)),
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(SolveStatus::Unbounded);
            };
            self.pivot(r, enter);
            let f = reduced[enter];
            for (rc, v) in reduced.iter_mut().zip(&self.a[r]) {
                *rc -= f * v;
            }
        }
        debug_assert!(false, "simplex pivot limit reached");
        Ok(())
    }

    /// Pivots zero-valued artificials out of the basis, dropping rows that
    /// turn out to be redundant.
    fn drive_out_artificials(&mut self, first_art: usize) {
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= first_art {
                match (0..first_art).find(|&j| self.a[i][j].abs() > PIVOT_TOL) {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.a.remove(i);
                        self.b.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0]);
        lp.add(vec![1.0], Cmp::Le, 5.0);
        let out = solve_lp(&lp);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn two_variables() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0, 1.0]);
        lp.add(vec![1.0, 1.0], Cmp::Le, 3.0);
        lp.add(vec![1.0, 0.0], Cmp::Le, 2.0);
        lp.add(vec![0.0, 1.0], Cmp::Le, 2.0);
        let out = solve_lp(&lp);
        assert!((out.objective - 3.0).abs() < 1e-9);
        assert!(lp.violation(&out.x) < 1e-7);
    }

    #[test]
    fn minimization_with_lower_rows() {
        let mut lp = LinearProgram::new(Sense::Min, vec![2.0, 3.0]);
        lp.add(vec![1.0, 1.0], Cmp::Ge, 4.0);
        lp.add(vec![1.0, 0.0], Cmp::Le, 3.0);
        let out = solve_lp(&lp);
        assert!((out.objective - 9.0).abs() < 1e-9, "{out:?}");
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0]);
        lp.add(vec![1.0], Cmp::Ge, 5.0);
        lp.add(vec![1.0], Cmp::Le, 3.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Infeasible);
        let lp = LinearProgram::new(Sense::Max, vec![1.0]);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Unbounded);
    }

    #[test]
    fn bounds_and_equalities() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0, -1.0, 2.0]);
        lp.bounds = vec![(1.0, 4.0), (2.0, 2.0), (-3.0, 1.0)];
        lp.add(vec![1.0, 1.0, 1.0], Cmp::Eq, 4.0);
        let out = solve_lp(&lp);
        // z is pushed to 1, x = 1 remains.
        assert!((out.objective - 1.0).abs() < 1e-9, "{out:?}");
        assert!(lp.violation(&out.x) < 1e-7);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0, 2.0]);
        lp.add(vec![1.0, 1.0], Cmp::Eq, 2.0);
        lp.add(vec![2.0, 2.0], Cmp::Eq, 4.0);
        let out = solve_lp(&lp);
        assert!((out.objective - 4.0).abs() < 1e-9);
    }
}

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lp::{gomory_cuts, solve_lp};
use super::{LinearProgram, MilpProgram, Sense, SolveOutcome, SolveStatus, INTEGRALITY_TOL};

const CUT_ROUNDS: usize = 8;
const CUTS_PER_ROUND: usize = 16;
const FEAS_TOL: f64 = 1e-6;

/// An open subproblem with the relaxation value of its parent.
struct Node {
    bound: f64,
    seq: u64,
    bounds: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.seq.cmp(&other.seq))
    }
}

/// Branch-and-bound over the LP relaxation, tightened first by a few rounds
/// of Gomory cuts at the root. It branches on the fractional
/// integer variable with the largest objective weight, most fractional
/// first among equals: allocation problems carry many zero-weight cells whose
/// fractions only shuffle between alternative optima, and branching on them
/// never moves the bound. Until an integer point is found the search dives depth
/// first, rounding side first; after that it expands the open node with the
/// best relaxation value, so the gap closes from above.
pub fn solve_milp(mp: &MilpProgram) -> SolveOutcome {
    let sign = if mp.lp.sense == Sense::Max { 1.0 } else { -1.0 };
    let root = with_root_cuts(mp);
    let mut dive = vec![Node { bound: f64::INFINITY, seq: 0, bounds: mp.lp.bounds.clone() }];
    let mut open: BinaryHeap<Node> = BinaryHeap::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0u64;
    let mut seq = 0u64;
    // Integer points score in steps of the granule, so a node must promise a
    // whole step over the incumbent to be worth expanding.
    let step = objective_granule(mp).unwrap_or(0.0);
    let beats = |value: f64, best: &Option<(f64, Vec<f64>)>| match best {
        Some((inc, _)) => value > inc + (step - 1e-6 * step).max(1e-9 * inc.abs().max(1.0)),
        None => true,
    };

    loop {
        let node = match dive.pop() {
            Some(n) => n,
            None => match open.pop() {
                Some(n) => n,
                None => break,
            },
        };
        if !beats(node.bound, &best) {
            // Best-first order: nothing left in the heap can beat the incumbent.
            if dive.is_empty() && best.is_some() {
                break;
            }
            continue;
        }
        nodes += 1;
        let relaxed = relax(&root, &mp.lp, &node.bounds);
        match relaxed.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => return SolveOutcome { nodes, ..relaxed },
            SolveStatus::Optimal => {}
        }
        let value = sign * relaxed.objective;
        if !beats(value, &best) {
            continue;
        }
        let branch = (0..relaxed.x.len())
            .filter(|&i| mp.integer[i])
            .map(|i| (i, (relaxed.x[i] - relaxed.x[i].floor() - 0.5).abs()))
            .filter(|&(_, d)| d < 0.5 - INTEGRALITY_TOL)
            .min_by(|a, b| {
                let (wa, wb) = if best.is_some() { (mp.lp.objective[a.0].abs(), mp.lp.objective[b.0].abs()) } else { (0.0, 0.0) };
                wb.total_cmp(&wa).then(a.1.total_cmp(&b.1)).then(a.0.cmp(&b.0))
            });
        match branch {
            None => {
                let x: Vec<f64> = relaxed.x.iter().zip(&mp.integer).map(|(v, int)| if *int { v.round() } else { *v }).collect();
                let value = sign * mp.lp.objective_at(&x);
                if best.as_ref().is_none_or(|(inc, _)| value > *inc) {
                    best = Some((value, x));
                    open.extend(dive.drain(..));
                }
            }
            Some((i, _)) => {
                let v = relaxed.x[i];
                let mut down = node.bounds.clone();
                down[i].1 = v.floor();
                let mut up = node.bounds;
                up[i].0 = v.ceil();
                let mut children = [up, down];
                if v - v.floor() < 0.5 {
                    children.reverse();
                }
                for bounds in children.into_iter().rev() {
                    seq += 1;
                    let child = Node { bound: value, seq, bounds };
                    if best.is_none() {
                        dive.push(child);
                    } else {
                        open.push(child);
                    }
                }
            }
        }
    }

    match best {
        Some((value, x)) => SolveOutcome { status: SolveStatus::Optimal, objective: sign * value, x, nodes },
        None => SolveOutcome::without_point(SolveStatus::Infeasible, nodes),
    }
}

/// The relaxation with cut rounds added until the point is integral, no
/// cut is found, or a round stops moving the bound. Cut rows are dense and
/// fractional; a round whose solve comes back inconsistent (a point off the
/// rows, or a bound that rose) is dropped.
fn with_root_cuts(mp: &MilpProgram) -> LinearProgram {
    let mut lp = mp.lp.clone();
    let mut last = f64::INFINITY;
    let mut pending = 0;
    for _ in 0..=CUT_ROUNDS {
        let (relaxed, cuts) = gomory_cuts(&lp, &mp.integer, CUTS_PER_ROUND);
        let value = if lp.sense == Sense::Max { relaxed.objective } else { -relaxed.objective };
        let consistent = relaxed.is_optimal() && lp.violation(&relaxed.x) <= FEAS_TOL && value <= last + 1e-9 * value.abs().max(1.0);
        if !consistent {
            lp.constraints.truncate(lp.constraints.len() - pending);
            break;
        }
        if cuts.is_empty() || last - value <= 1e-9 * value.abs().max(1.0) {
            break;
        }
        last = value;
        pending = cuts.len();
        lp.constraints.extend(cuts);
    }
    lp
}

/// Relaxation at a node. The cut rows only tighten; when their solve is
/// off the rows or claims infeasibility, the plain rows decide.
fn relax(root: &LinearProgram, plain: &LinearProgram, bounds: &[(f64, f64)]) -> SolveOutcome {
    let mut lp = root.clone();
    lp.bounds = bounds.to_vec();
    let out = solve_lp(&lp);
    let trusted = match out.status {
        SolveStatus::Optimal => lp.violation(&out.x) <= FEAS_TOL,
        SolveStatus::Infeasible => root.constraints.len() == plain.constraints.len(),
        SolveStatus::Unbounded => true,
    };
    if trusted {
        return out;
    }
    let mut lp = plain.clone();
    lp.bounds = bounds.to_vec();
    solve_lp(&lp)
}

/// Largest `g` with every objective coefficient an integer multiple of it,
/// looking at up to six decimal places; `None` when some continuous variable
/// carries weight or the coefficients need more precision.
fn objective_granule(mp: &MilpProgram) -> Option<f64> {
    if mp.lp.objective.iter().zip(&mp.integer).any(|(c, int)| !int && *c != 0.0) {
        return None;
    }
    let weights: Vec<f64> = mp.lp.objective.iter().copied().filter(|c| *c != 0.0).collect();
    let mut scale = 1.0;
    for _ in 0..=6 {
        let scaled: Option<Vec<u64>> = weights
            .iter()
            .map(|c| {
                let v = (c * scale).abs();
                ((v - v.round()).abs() <= 1e-9 * v.max(1.0) && v.round() < 1e15).then_some(v.round() as u64)
            })
            .collect();
        if let Some(ints) = scaled {
            let g = ints.into_iter().fold(0, gcd);
            return (g > 0).then(|| g as f64 / scale);
        }
        scale *= 10.0;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

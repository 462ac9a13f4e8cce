//! Decomposition of an overlapping constraint set into disjoint cells.
//!
//! Cells are explored depth first over the constraints; each node fixes
//! IN/OUT for a prefix of the constraint list. Unsatisfiable prefixes cut
//! their subtree, and when `X ∧ ψ` is unsatisfiable under a satisfiable `X`
//! the sibling `X ∧ ¬ψ` is admitted without a check. Past the optional depth
//! limit only a positive-box emptiness test is applied and surviving leaves
//! are admitted unverified.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::Result;
use crate::par::{self, Parallelism};
use crate::pc::PcSet;
use crate::predicate::{escape, residual_pieces, Interval, Predicate, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisitOrder {
    #[default]
    ListOrder,
    /// Most selective (smallest domain fraction) predicates first.
    Selectivity,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DecomposeOptions {
    pub early_stop_depth: Option<usize>,
    pub parallelism: Parallelism,
    pub order: VisitOrder,
}

impl DecomposeOptions {
    pub fn early_stop(depth: Option<usize>) -> Self {
        DecomposeOptions { early_stop_depth: depth, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DecomposeStats {
    pub sat_calls: u64,
    pub pruned_subtrees: u64,
    pub rewriting_hits: u64,
    pub early_stopped: bool,
    pub depth_limit: Option<usize>,
}

/// A disjoint region of the domain identified by which predicates contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// `signature[j]` is true when the cell lies inside constraint `j`'s ψ.
    pub signature: Vec<bool>,
    pub covering: Vec<usize>,
    /// False for cells outside the query region, which only matter through
    /// the cardinality windows they share with inside cells.
    pub inside: bool,
    /// False when admitted below the early-stopping depth.
    pub verified: bool,
    /// Disjoint boxes where a row of this cell may lie while satisfying every
    /// covering ν. Empty means no row can be placed here.
    pub pieces: Vec<Region>,
}

impl Cell {
    pub fn forced_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Reconciled value range of a numeric attribute, `None` when forced zero.
    pub fn value_range(&self, attr: usize) -> Option<Interval> {
        Region::hull(&self.pieces, attr)
    }

    pub fn value_upper(&self, attr: usize) -> Option<f64> {
        self.value_range(attr).map(|i| i.hi)
    }

    pub fn value_lower(&self, attr: usize) -> Option<f64> {
        self.value_range(attr).map(|i| i.lo)
    }

    /// An encoded point of the cell with `attr` pushed to its upper (or
    /// lower) reconciled end.
    pub fn extreme_point(&self, attr: usize, upper: bool) -> Option<Vec<f64>> {
        let key = |r: &Region| r.interval(attr).map(|i| if upper { i.hi } else { -i.lo });
        let best = self.pieces.iter().max_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal))?;
        let mut p = best.representative();
        if let Some(i) = best.interval(attr) {
            p[attr] = if upper { i.hi } else { i.lo };
        }
        Some(p)
    }

    pub fn to_json(&self, set: &PcSet) -> serde_json::Value {
        let schema = set.schema();
        let values: serde_json::Map<String, serde_json::Value> = schema
            .attributes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.domain.is_numeric())
            .filter_map(|(i, a)| self.value_range(i).map(|iv| (a.name.clone(), serde_json::json!({"lo": iv.lo, "hi": iv.hi}))))
            .collect();
        serde_json::json!({
            "signature": self.signature.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>(),
            "covering": self.covering.iter().map(|&j| set.get(j).id.clone()).collect::<Vec<_>>(),
            "inside": self.inside,
            "verified": self.verified,
            "forced_zero": self.forced_zero(),
            "values": values,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Cells inside the query region, sorted by covering set.
    pub cells: Vec<Cell>,
    /// Cells outside the query region that touch a constraint with `k_l > 0`,
    /// merged by covering set.
    pub outside: Vec<Cell>,
    pub stats: DecomposeStats,
}

impl Decomposition {
    pub fn all_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().chain(&self.outside)
    }

    pub fn is_exact(&self) -> bool {
        !self.stats.early_stopped
    }
}

struct Counters {
    sat_calls: AtomicU64,
    pruned: AtomicU64,
    rewrites: AtomicU64,
}

struct Dfs<'a> {
    set: &'a PcSet,
    order: Vec<usize>,
    limit: usize,
    par: Parallelism,
    counters: &'a Counters,
}

/// Subtrees below this depth are explored on the calling thread.
const PARALLEL_SPLIT_DEPTH: usize = 10;

impl Dfs<'_> {
    fn node(&self, depth: usize, signature: Vec<bool>, positive: Region, negatives: Vec<usize>, verified: bool) -> Vec<Cell> {
        if depth == self.order.len() {
            return self.leaf(signature, positive, &negatives, verified).into_iter().collect();
        }
        let j = self.order[depth];
        let in_box = positive.intersect(self.set.region(j));
        let mut out_negs = negatives.clone();
        out_negs.push(j);
        let exact = depth < self.limit;

        let (take_in, take_out) = if exact {
            let neg_regions: Vec<&Region> = negatives.iter().map(|&k| self.set.region(k)).collect();
            self.counters.sat_calls.fetch_add(1, Ordering::Relaxed);
            let in_sat = !in_box.is_empty() && escape(&in_box, &neg_regions).is_some();
            let out_sat = if in_sat {
                let mut all = neg_regions;
                all.push(self.set.region(j));
                self.counters.sat_calls.fetch_add(1, Ordering::Relaxed);
                escape(&positive, &all).is_some()
            } else {
                self.counters.rewrites.fetch_add(1, Ordering::Relaxed);
                true
            };
            (in_sat, out_sat)
        } else {
            (!in_box.is_empty(), !positive.is_within(self.set.region(j)))
        };
        let child_verified = verified && exact;
        for taken in [take_in, take_out] {
            if !taken {
                self.counters.pruned.fetch_add(1, Ordering::Relaxed);
            }
        }

        let mut in_sig = signature.clone();
        in_sig[j] = true;
        let go_in = || if take_in { self.node(depth + 1, in_sig, in_box, negatives, child_verified) } else { Vec::new() };
        let go_out = || if take_out { self.node(depth + 1, signature, positive, out_negs, child_verified) } else { Vec::new() };
        let par = if depth < PARALLEL_SPLIT_DEPTH { self.par } else { Parallelism::Sequential };
        let (mut a, b) = par::join(par, go_in, go_out);
        a.extend(b);
        a
    }

    fn leaf(&self, signature: Vec<bool>, positive: Region, negatives: &[usize], verified: bool) -> Option<Cell> {
        let covering: Vec<usize> = (0..signature.len()).filter(|&j| signature[j]).collect();
        if covering.is_empty() {
            return None;
        }
        let mut placeable = positive;
        for &j in &covering {
            placeable = placeable.intersect(self.set.nu_region(j));
        }
        let pieces = if verified {
            let negs: Vec<&Region> = negatives.iter().map(|&k| self.set.region(k)).collect();
            residual_pieces(&placeable, &negs)
        } else if placeable.is_empty() {
            Vec::new()
        } else {
            vec![placeable]
        };
        Some(Cell { signature, covering, inside: true, verified, pieces })
    }
}

fn visit_order(set: &PcSet, order: VisitOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    if order == VisitOrder::Selectivity {
        let domain = Region::domain(set.schema());
        let frac = |j: usize| volume_fraction(set.region(j), &domain);
        idx.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(a.cmp(&b)));
    }
    idx
}

fn volume_fraction(r: &Region, domain: &Region) -> f64 {
    use crate::predicate::Dim;
    r.dims()
        .iter()
        .zip(domain.dims())
        .map(|(d, full)| match (d, full) {
            (Dim::Num(i), Dim::Num(f)) if f.hi > f.lo => ((i.hi - i.lo) / (f.hi - f.lo)).max(0.0),
            (Dim::Num(i), Dim::Num(_)) => f64::from(u8::from(!i.is_empty())),
            (Dim::Cat(s), Dim::Cat(f)) => s.len() as f64 / f.len() as f64,
            _ => 1.0,
        })
        .product()
}

/// Cells of `set` within `clip` (the whole domain when `None`).
pub fn decompose(set: &PcSet, clip: Option<&Predicate>, opts: &DecomposeOptions) -> Result<Decomposition> {
    let clip_region = match clip {
        Some(p) => p.to_region(set.schema())?,
        None => Region::domain(set.schema()),
    };
    Ok(decompose_region(set, &clip_region, opts))
}

pub(crate) fn decompose_region(set: &PcSet, clip: &Region, opts: &DecomposeOptions) -> Decomposition {
    let counters = Counters { sat_calls: AtomicU64::new(0), pruned: AtomicU64::new(0), rewrites: AtomicU64::new(0) };
    let n = set.len();
    let limit = opts.early_stop_depth.unwrap_or(n).min(n);
    let dfs = Dfs { set, order: visit_order(set, opts.order), limit, par: opts.parallelism, counters: &counters };

    let mut cells = if clip.is_empty() { Vec::new() } else { dfs.node(0, vec![false; n], clip.clone(), Vec::new(), true) };
    cells.sort_by(|a, b| a.covering.cmp(&b.covering));

    let mut outside = Vec::new();
    if set.constraints().iter().any(|pc| pc.kappa.kl > 0) {
        let domain = Region::domain(set.schema());
        let mut merged: Vec<Cell> = Vec::new();
        for piece in domain.subtract(clip) {
            for mut cell in dfs.node(0, vec![false; n], piece, Vec::new(), true) {
                if !cell.covering.iter().any(|&j| set.get(j).kappa.kl > 0) {
                    continue;
                }
                cell.inside = false;
                match merged.iter_mut().find(|c| c.covering == cell.covering) {
                    Some(c) => {
                        c.pieces.append(&mut cell.pieces);
                        c.verified &= cell.verified;
                    }
                    None => merged.push(cell),
                }
            }
        }
        merged.sort_by(|a, b| a.covering.cmp(&b.covering));
        outside = merged;
    }

    Decomposition {
        cells,
        outside,
        stats: DecomposeStats {
            sat_calls: counters.sat_calls.into_inner(),
            pruned_subtrees: counters.pruned.into_inner(),
            rewriting_hits: counters.rewrites.into_inner(),
            early_stopped: limit < n,
            depth_limit: opts.early_stop_depth,
        },
    }
}

/// Recomputes the reconciled placement region of a cell from its signature.
pub fn reconcile(cell: &Cell, set: &PcSet, clip: Option<&Predicate>) -> Result<Cell> {
    let mut placeable = match clip {
        Some(p) => p.to_region(set.schema())?,
        None => Region::domain(set.schema()),
    };
    let mut negs = Vec::new();
    for (j, inside) in cell.signature.iter().enumerate() {
        if *inside {
            placeable = placeable.intersect(set.region(j)).intersect(set.nu_region(j));
        } else {
            negs.push(set.region(j));
        }
    }
    Ok(Cell { pieces: residual_pieces(&placeable, &negs), ..cell.clone() })
}

/// Checks every one of the `2^n - 1` covering sets directly. Exponential;
/// meant as a reference for small `n`.
pub fn enumerate_naive(set: &PcSet, clip: Option<&Predicate>) -> Result<Vec<Vec<usize>>> {
    let n = set.len();
    assert!(n < 31, "naive enumeration is limited to small sets");
    let base = match clip {
        Some(p) => p.to_region(set.schema())?,
        None => Region::domain(set.schema()),
    };
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let mut positive = base.clone();
        let mut negs = Vec::new();
        for j in 0..n {
            if mask & (1 << j) != 0 {
                positive = positive.intersect(set.region(j));
            } else {
                negs.push(set.region(j));
            }
        }
        if escape(&positive, &negs).is_some() {
            out.push((0..n).filter(|j| mask & (1 << j) != 0).collect());
        }
    }
    out.sort();
    Ok(out)
}

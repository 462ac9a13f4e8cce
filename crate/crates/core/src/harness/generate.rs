//! Truthful constraint sets built from the missing rows, and noise injection.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pc::{Frequency, PcSet, PredicateConstraint, ValueConstraint};
use crate::predicate::{Atom, Interval, Predicate};
use crate::schema::{Domain, Relation, Schema};

/// One side of a partition along a single attribute.
#[derive(Debug, Clone)]
enum Part {
    Range(Interval),
    Values(Vec<u32>),
}

impl Part {
    fn contains(&self, x: f64) -> bool {
        match self {
            Part::Range(iv) => iv.contains(x),
            Part::Values(v) => v.contains(&(x as u32)),
        }
    }

    fn atom(&self, values: &[String]) -> Atom {
        match self {
            Part::Range(iv) => Atom::Range(*iv),
            Part::Values(v) => Atom::one_of(v.iter().map(|&k| values[k as usize].clone())),
        }
    }
}

/// Splits attribute `i` into about `k` parts holding similar row counts.
fn quantile_parts(schema: &Schema, i: usize, column: &mut [f64], k: usize) -> Vec<Part> {
    let m = column.len();
    column.sort_by(f64::total_cmp);
    match &schema.attributes()[i].domain {
        Domain::Numeric { lo, hi } => {
            let mut cuts: Vec<f64> = (1..k).filter_map(|q| column.get(q * m / k).copied()).filter(|c| c > lo && c <= hi).collect();
            cuts.dedup();
            let mut edges = vec![*lo];
            edges.extend(cuts);
            let last = edges.len() - 1;
            (0..edges.len())
                .map(|j| {
                    Part::Range(if j == last { Interval::closed(edges[j], *hi) } else { Interval::right_open(edges[j], edges[j + 1]) })
                })
                .collect()
        }
        Domain::Categorical { values } => {
            let mut counts = vec![0usize; values.len()];
            for x in column.iter() {
                counts[*x as usize] += 1;
            }
            let mut parts = Vec::new();
            let mut current = Vec::new();
            let mut seen = 0;
            for (v, c) in counts.iter().enumerate() {
                current.push(v as u32);
                seen += c;
                if parts.len() + 1 < k && seen * k >= (parts.len() + 1) * m.max(1) && v + 1 < values.len() {
                    parts.push(Part::Values(std::mem::take(&mut current)));
                }
            }
            if !current.is_empty() {
                parts.push(Part::Values(current));
            }
            parts
        }
    }
}

fn attr_indices(schema: &Schema, attrs: &[&str]) -> Result<Vec<usize>> {
    let idx: Vec<usize> = attrs.iter().map(|a| schema.require(a)).collect::<Result<_>>()?;
    if idx.iter().collect::<BTreeSet<_>>().len() != idx.len() {
        return Err(Error::Config("partition attributes repeat".into()));
    }
    Ok(idx)
}

/// Count and value hull of the aggregated attribute over `rows`.
fn summarize<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, agg: usize) -> (u64, f64, f64) {
    rows.fold((0, f64::INFINITY, f64::NEG_INFINITY), |(n, lo, hi), r| (n + 1, lo.min(r[agg]), hi.max(r[agg])))
}

fn truthful(id: String, psi: Predicate, agg_name: &str, (count, lo, hi): (u64, f64, f64)) -> PredicateConstraint {
    let nu = if count > 0 { ValueConstraint::none().with(agg_name, lo, hi) } else { ValueConstraint::none() };
    PredicateConstraint::new(id, psi, nu, Frequency::exactly(count))
}

/// Grid of buckets over `attrs` with quantile cuts so that each of the about
/// `n` buckets holds a similar share of the missing rows. Buckets tile the
/// domain, so the set is closed.
pub fn gen_corr_pc(missing: &Relation, attrs: &[&str], agg: &str, n: usize) -> Result<PcSet> {
    let schema = missing.schema();
    let idx = attr_indices(schema, attrs)?;
    let a = schema.require(agg)?;
    let rows = missing.encoded();
    let k = if idx.is_empty() { 1 } else { ((n.max(1) as f64).powf(1.0 / idx.len() as f64).round() as usize).max(1) };
    let parts: Vec<Vec<Part>> =
        idx.iter().map(|&i| quantile_parts(schema, i, &mut rows.iter().map(|r| r[i]).collect::<Vec<_>>(), k)).collect();
    let radix: Vec<usize> = parts.iter().map(Vec::len).collect();
    let cells: usize = radix.iter().product();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (r, row) in rows.iter().enumerate() {
        let mut b = 0;
        for (d, &i) in idx.iter().enumerate() {
            let p = match &parts[d][0] {
                Part::Range(_) => {
                    parts[d].partition_point(|p| matches!(p, Part::Range(iv) if iv.hi < row[i] || (iv.hi == row[i] && iv.hi_open)))
                }
                Part::Values(_) => parts[d].iter().position(|p| p.contains(row[i])).expect("parts cover the domain"),
            };
            b = b * radix[d] + p;
        }
        buckets[b].push(r);
    }
    let pcs = buckets
        .iter()
        .enumerate()
        .map(|(b, members)| {
            let mut rest = b;
            let mut psi = Predicate::always();
            for d in (0..idx.len()).rev() {
                let p = &parts[d][rest % radix[d]];
                rest /= radix[d];
                if radix[d] > 1 {
                    let values = match &schema.attributes()[idx[d]].domain {
                        Domain::Categorical { values } => values.as_slice(),
                        Domain::Numeric { .. } => &[],
                    };
                    psi = psi.with(schema.attributes()[idx[d]].name.clone(), p.atom(values));
                }
            }
            truthful(format!("corr{b}"), psi, agg, summarize(members.iter().map(|&r| &rows[r]), a))
        })
        .collect();
    PcSet::new(schema.clone(), pcs)
}

/// `n` seeded random boxes over `attrs` plus one enclosing constraint, all
/// with the exact counts and value hulls of the missing rows they hold.
pub fn gen_rand_pc(missing: &Relation, attrs: &[&str], agg: &str, n: usize, seed: u64) -> Result<PcSet> {
    let schema = missing.schema();
    let idx = attr_indices(schema, attrs)?;
    let a = schema.require(agg)?;
    let rows = missing.encoded();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pcs = Vec::with_capacity(n + 1);
    for b in 0..n {
        let mut psi = Predicate::always();
        for &i in &idx {
            let attr = &schema.attributes()[i];
            let atom = match &attr.domain {
                Domain::Numeric { lo, hi } => {
                    let (x, y) = (rng.random_range(*lo..=*hi), rng.random_range(*lo..=*hi));
                    Atom::Range(Interval::closed(x.min(y), x.max(y)))
                }
                Domain::Categorical { values } => loop {
                    let pick: Vec<&String> = values.iter().filter(|_| rng.random_bool(0.5)).collect();
                    if !pick.is_empty() {
                        break Atom::one_of(pick.into_iter().cloned());
                    }
                },
            };
            psi = psi.with(attr.name.clone(), atom);
        }
        let region = psi.to_region(schema)?;
        let summary = summarize(rows.iter().filter(|r| region.contains_encoded(r)), a);
        pcs.push(truthful(format!("rand{b}"), psi, agg, summary));
    }
    pcs.push(truthful("all".into(), Predicate::always(), agg, summarize(rows.iter(), a)));
    PcSet::new(schema.clone(), pcs)
}

/// Moves every value-range endpoint by seeded Gaussian noise with standard
/// deviation `sigma` times the attribute's domain width, clamped to the
/// domain.
pub fn inject_noise(set: &PcSet, sigma: f64, seed: u64) -> Result<PcSet> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::Config(format!("noise level {sigma} must be nonnegative")));
    }
    if sigma == 0.0 {
        return Ok(set.clone());
    }
    let schema: Arc<Schema> = set.schema().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    set.map_constraints(|pc| {
        let mut pc = pc.clone();
        for (name, iv) in pc.nu.0.iter_mut() {
            let Some(Domain::Numeric { lo, hi }) = schema.attribute(name).map(|a| &a.domain) else { continue };
            let noise = Normal::new(0.0, sigma * (hi - lo)).expect("finite deviation");
            let x = (iv.lo + noise.sample(&mut rng)).clamp(*lo, *hi);
            let y = (iv.hi + noise.sample(&mut rng)).clamp(*lo, *hi);
            *iv = Interval::closed(x.min(y), x.max(y));
        }
        pc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc::satisfies_set;
    use crate::schema::{Attribute, Tuple, Value};

    fn relation(n: usize, seed: u64) -> Relation {
        let schema = Arc::new(
            Schema::new(vec![
                Attribute::numeric("x", 0.0, 1.0),
                Attribute::numeric("v", 0.0, 100.0),
                Attribute::categorical("c", ["a", "b", "c"]),
            ])
            .unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let c = ["a", "b", "c"][rng.random_range(0..3)];
                Tuple(vec![Value::Num(rng.random_range(0.0..1.0)), Value::Num(rng.random_range(0.0..100.0)), Value::from(c)])
            })
            .collect();
        Relation::new(schema, rows).unwrap()
    }

    #[test]
    fn single_bucket_is_global_summary() {
        let r = relation(50, 1);
        let set = gen_corr_pc(&r, &["x"], "v", 1).unwrap();
        assert_eq!(set.len(), 1);
        let pc = set.get(0);
        assert!(pc.psi.is_true());
        assert_eq!(pc.kappa, Frequency::exactly(50));
        let vs: Vec<f64> = r.encoded().iter().map(|row| row[1]).collect();
        let nu = pc.nu.get("v").unwrap();
        assert_eq!((nu.lo, nu.hi), (vs.iter().cloned().fold(f64::INFINITY, f64::min), vs.iter().cloned().fold(0.0, f64::max)));
    }

    #[test]
    fn quartile_cuts_follow_data() {
        let r = relation(4000, 2);
        let set = gen_corr_pc(&r, &["x"], "v", 4).unwrap();
        assert_eq!(set.len(), 4);
        let mut xs: Vec<f64> = r.encoded().iter().map(|row| row[0]).collect();
        xs.sort_by(f64::total_cmp);
        for (j, pc) in set.constraints().iter().enumerate().skip(1) {
            let Some(Atom::Range(iv)) = pc.psi.atoms.get("x") else { panic!() };
            assert_eq!(iv.lo, xs[j * 1000]);
            assert!((iv.lo - 0.25 * j as f64).abs() < 0.05);
        }
    }

    #[test]
    fn generated_sets_are_truthful_and_closed() {
        for seed in 0..5 {
            let r = relation(300, seed);
            for set in [
                gen_corr_pc(&r, &["x", "c"], "v", 6).unwrap(),
                gen_corr_pc(&r, &["c"], "v", 2).unwrap(),
                gen_rand_pc(&r, &["x", "c"], "v", 5, seed).unwrap(),
            ] {
                assert!(satisfies_set(&r, &set).unwrap());
                assert!(set.check_closure(None).unwrap().is_closed());
            }
        }
    }

    #[test]
    fn rand_pc_is_seeded() {
        let r = relation(100, 3);
        let a = gen_rand_pc(&r, &["x"], "v", 4, 9).unwrap().to_json();
        assert_eq!(a, gen_rand_pc(&r, &["x"], "v", 4, 9).unwrap().to_json());
        assert_eq!(gen_rand_pc(&r, &["x"], "v", 0, 9).unwrap().len(), 1);
    }

    #[test]
    fn zero_noise_is_identity() {
        let r = relation(100, 4);
        let set = gen_corr_pc(&r, &["x"], "v", 5).unwrap();
        assert_eq!(inject_noise(&set, 0.0, 1).unwrap().to_json(), set.to_json());
        let noisy = inject_noise(&set, 0.1, 1).unwrap();
        for pc in noisy.constraints() {
            let iv = pc.nu.get("v").unwrap();
            assert!(0.0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 100.0);
        }
    }
}

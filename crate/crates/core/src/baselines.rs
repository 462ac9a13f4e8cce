//! Statistical estimators compared against constraint-based ranges: sampling
//! with parametric and nonparametric intervals, and an equi-width histogram.
//!
//! All estimators describe the missing rows only; callers add the exact
//! contribution of the rows they still hold.

use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pc::{Frequency, PcSet, PredicateConstraint, ValueConstraint};
use crate::predicate::{Dim, Interval, Predicate, Region};
use crate::query::{Aggregate, QuerySpec};
use crate::schema::{Domain, Relation, Schema};

/// An estimated range for the missing part of a query answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub lo: f64,
    pub hi: f64,
    pub point: f64,
    /// No sampled row matched the query, so no interval could be formed.
    pub undefined: bool,
}

impl Estimate {
    fn exact(v: f64) -> Self {
        Estimate { lo: v, hi: v, point: v, undefined: false }
    }

    fn undefined() -> Self {
        Estimate { lo: 0.0, hi: 0.0, point: 0.0, undefined: true }
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        !self.undefined && self.lo - tol <= value && value <= self.hi + tol
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02, 6.680131188771972e+01, -1.328068155288572e+01];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;
    assert!(p > 0.0 && p < 1.0, "quantile level {p} outside (0, 1)");
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// Normal approximation with the estimated standard error.
    Parametric,
    /// Hoeffding bound with the observed sample spread as the value range.
    Nonparametric,
}

#[derive(Debug, Clone)]
struct Stratum {
    population: usize,
    rows: Vec<Vec<f64>>,
}

/// A sample of the missing rows, optionally stratified.
#[derive(Debug, Clone)]
pub struct SampleEstimator {
    schema: Arc<Schema>,
    strata: Vec<Stratum>,
    kind: IntervalKind,
    confidence: f64,
}

impl SampleEstimator {
    /// Draws `n` rows uniformly without replacement.
    pub fn uniform(missing: &Relation, n: usize, kind: IntervalKind, confidence: f64, seed: u64) -> Result<Self> {
        let all = Region::domain(missing.schema());
        Self::stratified(missing, &[all], n, kind, confidence, seed)
    }

    /// Splits the rows by the first stratum region containing them (rows in
    /// none form a trailing stratum) and samples each in proportion to its
    /// size, at least one row per nonempty stratum.
    pub fn stratified(missing: &Relation, strata: &[Region], n: usize, kind: IntervalKind, confidence: f64, seed: u64) -> Result<Self> {
        check_confidence(confidence)?;
        let rows = missing.encoded();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); strata.len() + 1];
        for (i, r) in rows.iter().enumerate() {
            let h = strata.iter().position(|s| s.contains_encoded(r)).unwrap_or(strata.len());
            members[h].push(i);
        }
        let total = rows.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for m in members.into_iter().filter(|m| !m.is_empty()) {
            let share = ((n as f64) * m.len() as f64 / total as f64).round() as usize;
            let take = share.clamp(1, m.len());
            let mut chosen = index::sample(&mut rng, m.len(), take).into_vec();
            chosen.sort_unstable();
            out.push(Stratum { population: m.len(), rows: chosen.into_iter().map(|k| rows[m[k]].clone()).collect() });
        }
        Ok(SampleEstimator { schema: missing.schema().clone(), strata: out, kind, confidence })
    }

    /// An estimator over a given sample of a population of `population` rows.
    pub fn from_sample(schema: Arc<Schema>, population: usize, sample: Vec<Vec<f64>>, kind: IntervalKind, confidence: f64) -> Result<Self> {
        check_confidence(confidence)?;
        if sample.is_empty() || sample.len() > population {
            return Err(Error::Config(format!("sample of {} rows from a population of {population}", sample.len())));
        }
        Ok(SampleEstimator { schema, strata: vec![Stratum { population, rows: sample }], kind, confidence })
    }

    pub fn sample_size(&self) -> usize {
        self.strata.iter().map(|s| s.rows.len()).sum()
    }

    pub fn population(&self) -> usize {
        self.strata.iter().map(|s| s.population).sum()
    }

    /// Interval for the SUM or COUNT of the missing rows matching the query.
    pub fn interval(&self, query: &QuerySpec) -> Result<Estimate> {
        let attr = summed_attribute(&self.schema, query)?;
        let Some(p) = &query.predicate else { return Ok(Estimate::exact(0.0)) };
        let region = p.to_region(&self.schema)?;
        if self.strata.is_empty() {
            return Ok(Estimate::exact(0.0));
        }
        let alpha = 1.0 - self.confidence;
        let (mut point, mut var, mut spread, mut matched) = (0.0, 0.0, 0.0, false);
        for s in &self.strata {
            let ys: Vec<f64> = s
                .rows
                .iter()
                .map(|r| match (region.contains_encoded(r), attr) {
                    (false, _) => 0.0,
                    (true, Some(a)) => r[a],
                    (true, None) => 1.0,
                })
                .collect();
            matched |= s.rows.iter().any(|r| region.contains_encoded(r));
            let n = ys.len() as f64;
            let big_n = s.population as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let s2 = if ys.len() > 1 { ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let fpc = if s.population > 1 { (big_n - n) / (big_n - 1.0) } else { 0.0 };
            let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), y| (l.min(*y), h.max(*y)));
            point += big_n * mean;
            var += big_n * big_n * fpc * s2 / n;
            spread += big_n * big_n * fpc * (hi - lo).powi(2) / n;
        }
        if !matched {
            return Ok(Estimate::undefined());
        }
        let half = match self.kind {
            IntervalKind::Parametric => normal_quantile(1.0 - alpha / 2.0) * var.sqrt(),
            IntervalKind::Nonparametric => ((2.0 / alpha).ln() / 2.0 * spread).sqrt(),
        };
        Ok(Estimate { lo: point - half, hi: point + half, point, undefined: false })
    }
}

fn check_confidence(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("confidence level {c} outside (0, 1)")))
    }
}

/// The attribute a SUM adds up, `None` for COUNT; other aggregates are
/// rejected.
fn summed_attribute(schema: &Schema, query: &QuerySpec) -> Result<Option<usize>> {
    query.validate(schema)?;
    match query.aggregate {
        Aggregate::Count => Ok(None),
        Aggregate::Sum => Ok(Some(schema.require(query.target.as_deref().expect("validated SUM has a target"))?)),
        other => Err(Error::Semantic(format!("baselines support SUM and COUNT, not {other}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    /// Values in the bucket lie in `[lo, hi)`, or `[lo, hi]` for the last one.
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
    pub count: u64,
}

impl Bucket {
    fn values(&self) -> Interval {
        Interval::new(self.lo, self.hi, false, !self.closed)
    }
}

#[derive(Debug, Clone)]
enum Marginal {
    Numeric { buckets: Vec<Bucket> },
    Categorical { counts: Vec<u64> },
}

/// Equi-width histogram of the aggregate attribute plus marginal histograms
/// of every other attribute.
#[derive(Debug, Clone)]
pub struct HistogramSynopsis {
    schema: Arc<Schema>,
    attr: usize,
    buckets: Vec<Bucket>,
    total: u64,
    marginals: Vec<Marginal>,
}

fn equi_width(values: &[f64], n: usize) -> Vec<Bucket> {
    if values.is_empty() {
        return Vec::new();
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let n = if max > min { n.max(1) } else { 1 };
    let width = (max - min) / n as f64;
    let mut edges: Vec<f64> = (0..n).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    let mut buckets: Vec<Bucket> = (0..n).map(|i| Bucket { lo: edges[i], hi: edges[i + 1], closed: i + 1 == n, count: 0 }).collect();
    for v in values {
        let i = edges[..n].partition_point(|e| e <= v) - 1;
        buckets[i].count += 1;
    }
    buckets
}

impl HistogramSynopsis {
    pub fn build(missing: &Relation, attr: &str, n: usize) -> Result<Self> {
        let schema = missing.schema().clone();
        let a = schema.require(attr)?;
        if !schema.attributes()[a].domain.is_numeric() {
            return Err(Error::Config(format!("histogram attribute `{attr}` must be numeric")));
        }
        let rows = missing.encoded();
        let column = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        let marginals = schema
            .attributes()
            .iter()
            .enumerate()
            .map(|(i, at)| match &at.domain {
                Domain::Numeric { .. } => Marginal::Numeric { buckets: equi_width(&column(i), n) },
                Domain::Categorical { values } => {
                    let mut counts = vec![0; values.len()];
                    for r in &rows {
                        counts[r[i] as usize] += 1;
                    }
                    Marginal::Categorical { counts }
                }
            })
            .collect();
        Ok(HistogramSynopsis { buckets: equi_width(&column(a), n), schema, attr: a, total: rows.len() as u64, marginals })
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Bounds on the fraction of rows passing the constraint on attribute
    /// `i`, read off its marginal.
    fn fraction(&self, i: usize, dim: &Dim) -> (f64, f64) {
        if self.total == 0 {
            return (1.0, 1.0);
        }
        let t = self.total as f64;
        match (&self.marginals[i], dim) {
            (Marginal::Numeric { buckets }, Dim::Num(iv)) => {
                let (mut full, mut touched) = (0, 0);
                for b in buckets {
                    let v = b.values();
                    if v.is_within(iv) {
                        full += b.count;
                    }
                    if v.intersects(iv) {
                        touched += b.count;
                    }
                }
                (full as f64 / t, touched as f64 / t)
            }
            (Marginal::Categorical { counts }, Dim::Cat(set)) => {
                let k: u64 = counts.iter().enumerate().filter(|(v, _)| set.contains(*v)).map(|(_, c)| c).sum();
                (k as f64 / t, k as f64 / t)
            }
            _ => unreachable!("marginal kinds follow the schema"),
        }
    }

    /// Range of the SUM or COUNT over the missing rows matching the query.
    /// Predicates on other attributes scale bucket counts by independence.
    pub fn bound(&self, query: &QuerySpec) -> Result<Estimate> {
        let attr = summed_attribute(&self.schema, query)?;
        if attr.is_some_and(|a| a != self.attr) {
            return Err(Error::Semantic("histogram covers a different attribute".into()));
        }
        let Some(p) = &query.predicate else { return Ok(Estimate::exact(0.0)) };
        let region = p.to_region(&self.schema)?;
        let domain = Region::domain(&self.schema);
        let (mut f_lo, mut f_hi) = (1.0, 1.0);
        for i in 0..self.schema.len() {
            if i != self.attr && region.dim(i) != domain.dim(i) {
                let (l, h) = self.fraction(i, region.dim(i));
                f_lo *= l;
                f_hi *= h;
            }
        }
        let q = region.interval(self.attr).expect("numeric attribute");
        let (mut lo, mut hi) = (0.0, 0.0);
        for b in &self.buckets {
            let v = b.values();
            let inside = v.intersect(&q);
            if inside.is_empty() {
                continue;
            }
            let c = b.count as f64;
            let c_hi = (c * f_hi).ceil();
            let c_lo = if v.is_within(&q) { (c * f_lo).floor() } else { 0.0 };
            match attr {
                None => {
                    lo += c_lo;
                    hi += c_hi;
                }
                Some(_) => {
                    lo += (c_lo * inside.lo).min(c_hi * inside.lo);
                    hi += (c_lo * inside.hi).max(c_hi * inside.hi);
                }
            }
        }
        Ok(Estimate { lo, hi, point: (lo + hi) / 2.0, undefined: false })
    }

    /// The histogram as one constraint per bucket: the predicate spans the
    /// bucket (the outer buckets stretch to the domain ends), the value range
    /// is the bucket and the count is exact.
    pub fn to_pcs(&self) -> Result<PcSet> {
        let name = &self.schema.attributes()[self.attr].name;
        let Domain::Numeric { lo: dom_lo, hi: dom_hi } = self.schema.attributes()[self.attr].domain else { unreachable!() };
        let last = self.buckets.len().saturating_sub(1);
        let pcs = if self.buckets.is_empty() {
            vec![PredicateConstraint::new("b0", Predicate::always(), ValueConstraint::none(), Frequency::exactly(0))]
        } else {
            self.buckets
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let lo = if i == 0 { dom_lo } else { b.lo };
                    let psi = if i == last { Interval::closed(lo, dom_hi) } else { Interval::right_open(lo, b.hi) };
                    PredicateConstraint::new(
                        format!("b{i}"),
                        Predicate::range(name.clone(), psi),
                        ValueConstraint::none().with(name.clone(), b.lo, b.hi),
                        Frequency::exactly(b.count),
                    )
                })
                .collect()
        };
        PcSet::new(self.schema.clone(), pcs)
    }
}

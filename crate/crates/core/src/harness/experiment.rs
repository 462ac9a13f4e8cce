//! Experiment runner: random range queries answered by every baseline and
//! scored against the full dataset.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{Estimate, HistogramSynopsis, IntervalKind, SampleEstimator};
use crate::bound::{bound_clipped, BoundOptions, Existing};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::pc::PcSet;
use crate::predicate::{Atom, Interval, Predicate, Region};
use crate::query::{pretty_print, Aggregate, QuerySpec};
use crate::schema::{Domain, Relation, Schema};

use super::generate::{gen_corr_pc, gen_rand_pc, inject_noise};
use super::ingest::{ingest_csv, IngestMode};
use super::scenario::{make_scenario, synthetic_dataset, RemovalMode, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "corr-pc")]
    CorrPc,
    #[serde(rename = "rand-pc")]
    RandPc,
    #[serde(rename = "us-1p")]
    Us1p,
    #[serde(rename = "us-10p")]
    Us10p,
    #[serde(rename = "us-1n")]
    Us1n,
    #[serde(rename = "us-10n")]
    Us10n,
    #[serde(rename = "st-1p")]
    St1p,
    #[serde(rename = "st-10p")]
    St10p,
    #[serde(rename = "st-1n")]
    St1n,
    #[serde(rename = "st-10n")]
    St10n,
    #[serde(rename = "hist")]
    Hist,
    /// The histogram restated as constraints and bounded by the engine.
    #[serde(rename = "hist-pc")]
    HistPc,
}

impl Baseline {
    pub const ALL: [Baseline; 12] = [
        Baseline::CorrPc,
        Baseline::RandPc,
        Baseline::Us1p,
        Baseline::Us10p,
        Baseline::Us1n,
        Baseline::Us10n,
        Baseline::St1p,
        Baseline::St10p,
        Baseline::St1n,
        Baseline::St10n,
        Baseline::Hist,
        Baseline::HistPc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::CorrPc => "corr-pc",
            Baseline::RandPc => "rand-pc",
            Baseline::Us1p => "us-1p",
            Baseline::Us10p => "us-10p",
            Baseline::Us1n => "us-1n",
            Baseline::Us10n => "us-10n",
            Baseline::St1p => "st-1p",
            Baseline::St10p => "st-10p",
            Baseline::St1n => "st-1n",
            Baseline::St10n => "st-10n",
            Baseline::Hist => "hist",
            Baseline::HistPc => "hist-pc",
        }
    }

    /// Whether the baseline is answered by the constraint engine.
    pub fn is_pc(self) -> bool {
        matches!(self, Baseline::CorrPc | Baseline::RandPc | Baseline::HistPc)
    }

    /// Sample multiplier, stratification and interval kind of a sampling
    /// baseline.
    fn sampling(self) -> Option<(usize, bool, IntervalKind)> {
        use IntervalKind::*;
        Some(match self {
            Baseline::Us1p => (1, false, Parametric),
            Baseline::Us10p => (10, false, Parametric),
            Baseline::Us1n => (1, false, Nonparametric),
            Baseline::Us10n => (10, false, Nonparametric),
            Baseline::St1p => (1, true, Parametric),
            Baseline::St10p => (10, true, Parametric),
            Baseline::St1n => (1, true, Nonparametric),
            Baseline::St10n => (10, true, Nonparametric),
            _ => return None,
        })
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| Error::Config(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        rows: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: Schema,
        #[serde(default)]
        lenient: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub fraction: f64,
    pub mode: RemovalMode,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcConfig {
    /// Attributes the generated predicates range over.
    pub attributes: Vec<String>,
    /// Corr-PC bucket count; also the base sample size and stratum count.
    pub corr_n: usize,
    pub rand_n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative noise added to every value range.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub count: usize,
    pub aggregates: Vec<Aggregate>,
    /// Attributes each query constrains.
    pub attributes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_confidence() -> f64 {
    0.99
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub aggregate_attribute: String,
    pub scenario: ScenarioConfig,
    pub baselines: Vec<Baseline>,
    pub pc: PcConfig,
    pub queries: QueryConfig,
    /// Defaults to `pc.corr_n`.
    #[serde(default)]
    pub histogram_buckets: Option<usize>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Record per-query timings; off keeps the CSV byte-identical across runs.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    /// The synthetic scenario used by the shipped experiments.
    pub fn synthetic(seed: u64) -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::Synthetic { rows: 100_000, seed: 7 },
            aggregate_attribute: "value".into(),
            scenario: ScenarioConfig { fraction: 0.1, mode: RemovalMode::CorrelatedTop, seed },
            baselines: Baseline::ALL.to_vec(),
            pc: PcConfig { attributes: vec!["utc".into()], corr_n: 100, rand_n: 10, seed, noise: 0.0 },
            queries: QueryConfig {
                count: 1000,
                aggregates: vec![Aggregate::Sum, Aggregate::Count],
                attributes: vec!["utc".into(), "device".into()],
                seed,
            },
            histogram_buckets: None,
            confidence: default_confidence(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.baselines.is_empty() {
            return Err(Error::Config("no baselines selected".into()));
        }
        if self.queries.aggregates.is_empty() {
            return Err(Error::Config("no aggregates selected".into()));
        }
        if self.pc.corr_n == 0 {
            return Err(Error::Config("corr_n must be positive".into()));
        }
        let statistical = self.baselines.iter().any(|b| !b.is_pc());
        if statistical && self.queries.aggregates.iter().any(|a| !matches!(a, Aggregate::Sum | Aggregate::Count)) {
            return Err(Error::Config("sampling and histogram baselines support SUM and COUNT only".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        Ok(())
    }
}

/// One baseline's answer to one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub query_id: usize,
    pub sql: String,
    pub truth: f64,
    pub baseline: Baseline,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub failed: bool,
    pub overest: Option<f64>,
    pub micros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineMetrics {
    pub baseline: Baseline,
    pub failure_rate: f64,
    pub failures: usize,
    pub median_overestimation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_micros: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub queries: usize,
    pub missing_rows: usize,
    pub baselines: Vec<BaselineMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl MetricsReport {
    pub fn get(&self, b: Baseline) -> Option<&BaselineMetrics> {
        self.baselines.iter().find(|m| m.baseline == b)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub records: Vec<QueryRecord>,
}

impl ExperimentOutput {
    /// Per-query CSV: `query_id, sql, truth, baseline, lo, hi, failed,
    /// overest, micros`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["query_id", "sql", "truth", "baseline", "lo", "hi", "failed", "overest", "micros"])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.query_id.to_string(),
                r.sql.clone(),
                r.truth.to_string(),
                r.baseline.to_string(),
                opt(r.lo),
                opt(r.hi),
                r.failed.to_string(),
                opt(r.overest),
                r.micros.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

enum Answerer {
    Pc(PcSet),
    Sample(SampleEstimator),
    Hist(HistogramSynopsis),
}

/// Random conjunctive range queries over `attrs`: numeric ranges with
/// endpoints drawn from the observed span (rounded to cents), and random
/// nonempty value subsets.
pub fn generate_queries(schema: &Schema, rows: &[Vec<f64>], cfg: &QueryConfig, agg_attr: &str) -> Result<Vec<QuerySpec>> {
    let idx: Vec<usize> = cfg.attributes.iter().map(|a| schema.require(a)).collect::<Result<_>>()?;
    let spans: Vec<(f64, f64)> =
        idx.iter().map(|&i| rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r[i]), h.max(r[i])))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let agg = cfg.aggregates[rng.random_range(0..cfg.aggregates.len())];
        let target = (agg != Aggregate::Count).then_some(agg_attr);
        let mut p = Predicate::always();
        for (k, &i) in idx.iter().enumerate() {
            let attr = &schema.attributes()[i];
            let atom = match &attr.domain {
                Domain::Numeric { .. } => {
                    let (lo, hi) = if spans[k].0 <= spans[k].1 { spans[k] } else { (0.0, 0.0) };
                    let draw = |rng: &mut ChaCha8Rng| (rng.random_range(lo..=hi) * 100.0).round() / 100.0;
                    let (x, y) = (draw(&mut rng), draw(&mut rng));
                    Atom::Range(Interval::closed(x.min(y), x.max(y)))
                }
                Domain::Categorical { values } => loop {
                    let pick: Vec<&String> = values.iter().filter(|_| rng.random_bool(0.5)).collect();
                    if !pick.is_empty() {
                        break Atom::one_of(pick.into_iter().cloned());
                    }
                },
            };
            p = p.with(attr.name.clone(), atom);
        }
        out.push(QuerySpec::new(agg, target, "data").with_predicate(Some(p)));
    }
    Ok(out)
}

fn load(cfg: &DatasetConfig) -> Result<Relation> {
    match cfg {
        DatasetConfig::Synthetic { rows, seed } => Ok(synthetic_dataset(*rows, *seed)),
        DatasetConfig::Csv { path, schema, lenient } => {
            let mode = if *lenient { IngestMode::Lenient } else { IngestMode::Strict };
            Ok(ingest_csv(path, Arc::new(schema.clone()), mode)?.relation)
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let data = load(&cfg.dataset)?;
    let scenario = make_scenario(data, &cfg.aggregate_attribute, cfg.scenario.fraction, cfg.scenario.mode, cfg.scenario.seed)?;
    run_on(cfg, &scenario)
}

/// Runs the experiment on a prepared scenario.
pub fn run_on(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let schema = scenario.data.schema().clone();
    let agg = schema.require(&cfg.aggregate_attribute)?;
    let missing = scenario.missing_relation();
    let present = scenario.present_rows();
    let attrs: Vec<&str> = cfg.pc.attributes.iter().map(String::as_str).collect();
    let n = cfg.pc.corr_n;
    let corr = gen_corr_pc(&missing, &attrs, &cfg.aggregate_attribute, n)?;
    let buckets = cfg.histogram_buckets.unwrap_or(n);

    let mut answerers = Vec::with_capacity(cfg.baselines.len());
    for (k, &b) in cfg.baselines.iter().enumerate() {
        let seed = cfg.pc.seed.wrapping_add(k as u64);
        let a = match b {
            Baseline::CorrPc => Answerer::Pc(inject_noise(&corr, cfg.pc.noise, seed)?),
            Baseline::RandPc => {
                let set = gen_rand_pc(&missing, &attrs, &cfg.aggregate_attribute, cfg.pc.rand_n, cfg.pc.seed)?;
                Answerer::Pc(inject_noise(&set, cfg.pc.noise, seed)?)
            }
            Baseline::Hist => Answerer::Hist(HistogramSynopsis::build(&missing, &cfg.aggregate_attribute, buckets)?),
            Baseline::HistPc => Answerer::Pc(HistogramSynopsis::build(&missing, &cfg.aggregate_attribute, buckets)?.to_pcs()?),
            _ => {
                let (mult, stratified, kind) = b.sampling().expect("sampling baseline");
                let size = n * mult;
                let est = if missing.is_empty() {
                    None
                } else if stratified {
                    let strata: Vec<Region> = (0..corr.len()).map(|j| corr.region(j).clone()).collect();
                    Some(SampleEstimator::stratified(&missing, &strata, size, kind, cfg.confidence, seed)?)
                } else {
                    Some(SampleEstimator::uniform(&missing, size, kind, cfg.confidence, seed)?)
                };
                match est {
                    Some(e) => Answerer::Sample(e),
                    None => Answerer::Hist(HistogramSynopsis::build(&missing, &cfg.aggregate_attribute, 1)?),
                }
            }
        };
        answerers.push(a);
    }

    let queries = generate_queries(&schema, &scenario.rows, &cfg.queries, &cfg.aggregate_attribute)?;
    let opts = BoundOptions { parallelism: Parallelism::Sequential, ..BoundOptions::default() };
    let ids: Vec<usize> = (0..queries.len()).collect();
    let per_query = par::map(Parallelism::Parallel, &ids, |&id| -> Result<Vec<QueryRecord>> {
        answer(id, &queries[id], &schema, agg, scenario, &present, &answerers, &cfg.baselines, &opts, cfg.timing)
    });
    let mut records = Vec::with_capacity(queries.len() * cfg.baselines.len());
    for r in per_query {
        records.extend(r?);
    }
    let baselines = cfg.baselines.iter().map(|&b| metrics(b, &records, cfg.timing)).collect();
    let report = MetricsReport {
        queries: queries.len(),
        missing_rows: scenario.missing.len(),
        baselines,
        runtime_ms: cfg.timing.then(|| started.elapsed().as_millis() as u64),
    };
    Ok(ExperimentOutput { report, records })
}

#[allow(clippy::too_many_arguments)]
fn answer(
    id: usize,
    q: &QuerySpec,
    schema: &Schema,
    agg: usize,
    scenario: &Scenario,
    present: &[Vec<f64>],
    answerers: &[Answerer],
    baselines: &[Baseline],
    opts: &BoundOptions,
    timing: bool,
) -> Result<Vec<QueryRecord>> {
    let region = q.predicate.as_ref().expect("generated queries are satisfiable").to_region(schema)?;
    let agg_attr = (q.aggregate != Aggregate::Count).then_some(agg);
    let truth = aggregate(&Existing::from_rows(&scenario.rows, &region, agg_attr), q.aggregate);
    let existing = Existing::from_rows(present, &region, agg_attr);
    let sql = pretty_print(q);
    let mut out = Vec::with_capacity(answerers.len());
    for (a, &b) in answerers.iter().zip(baselines) {
        let t = Instant::now();
        let (lo, hi) = match a {
            Answerer::Pc(set) => {
                let r = bound_clipped(q.aggregate, agg_attr, &region, set, &existing, opts)?;
                if r.is_bounded() {
                    (r.lower, r.upper)
                } else {
                    (None, None)
                }
            }
            Answerer::Sample(s) => shift(s.interval(q)?, &existing, q.aggregate),
            Answerer::Hist(h) => shift(h.bound(q)?, &existing, q.aggregate),
        };
        let micros = if timing { t.elapsed().as_micros() as u64 } else { 0 };
        let tol = 1e-9 * truth.abs().max(1.0);
        let failed = match (lo, hi) {
            (Some(l), Some(h)) => !(l - tol <= truth && truth <= h + tol),
            _ => true,
        };
        let overest = match hi {
            Some(h) if truth > 0.0 => Some(h / truth),
            _ => None,
        };
        out.push(QueryRecord { query_id: id, sql: sql.clone(), truth, baseline: b, lo, hi, failed, overest, micros });
    }
    Ok(out)
}

fn aggregate(e: &Existing, agg: Aggregate) -> f64 {
    match agg {
        Aggregate::Count => e.count as f64,
        Aggregate::Sum => e.sum,
        Aggregate::Avg => {
            if e.count > 0 {
                e.sum / e.count as f64
            } else {
                f64::NAN
            }
        }
        Aggregate::Min => e.min.unwrap_or(f64::NAN),
        Aggregate::Max => e.max.unwrap_or(f64::NAN),
    }
}

/// Adds the exact contribution of the present rows to a missing-part
/// estimate.
fn shift(e: Estimate, existing: &Existing, agg: Aggregate) -> (Option<f64>, Option<f64>) {
    if e.undefined {
        return (None, None);
    }
    let base = aggregate(existing, agg);
    (Some(base + e.lo), Some(base + e.hi))
}

fn metrics(b: Baseline, records: &[QueryRecord], timing: bool) -> BaselineMetrics {
    let mine: Vec<&QueryRecord> = records.iter().filter(|r| r.baseline == b).collect();
    let failures = mine.iter().filter(|r| r.failed).count();
    let mut over: Vec<f64> = mine.iter().filter_map(|r| r.overest).collect();
    over.sort_by(f64::total_cmp);
    let median = match over.len() {
        0 => None,
        k if k % 2 == 1 => Some(over[k / 2]),
        k => Some((over[k / 2 - 1] + over[k / 2]) / 2.0),
    };
    BaselineMetrics {
        baseline: b,
        failure_rate: if mine.is_empty() { 0.0 } else { failures as f64 / mine.len() as f64 },
        failures,
        median_overestimation: median,
        mean_micros: timing.then(|| mine.iter().map(|r| r.micros as f64).sum::<f64>() / mine.len().max(1) as f64),
    }
}

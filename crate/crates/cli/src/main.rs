//! `rangebound` command-line front end. Machine output is JSON on stdout;
//! diagnostics and the optional `--pretty` table go to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rangebound::bound::{bound_query, greedy_disjoint, BoundOptions, BoundOutput, ResultRange, Status};
use rangebound::decompose::{decompose, DecomposeOptions, VisitOrder};
use rangebound::harness::{ingest_csv, run_experiment, Baseline, ExperimentConfig, IngestMode};
use rangebound::join::{join_bound, JoinGraph, JoinMethod};
use rangebound::par;
use rangebound::pc::{satisfies, Closure, PcSet};
use rangebound::query::{parse_query, pretty_print, Aggregate, QuerySpec};
use rangebound::schema::{Relation, Schema};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "rangebound", version, about = "Result ranges for aggregate queries over missing rows")]
struct Cli {
    /// Cap on engine worker threads.
    #[arg(long, global = true, env = "RANGEBOUND_THREADS")]
    threads: Option<usize>,
    /// Also print a human-readable summary to stderr.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound an aggregate query over the rows described by a constraint set.
    Bound(BoundArgs),
    /// List the cells of a constraint set.
    Decompose(DecomposeArgs),
    /// Validate a constraint set and check closure (and optionally data).
    Check(CheckArgs),
    /// Bound a SUM/COUNT over a natural join of constrained relations.
    JoinBound(JoinArgs),
    /// Run a baseline comparison experiment.
    Experiment(ExperimentArgs),
    /// Parse a query and print its structured form.
    Parse(ParseArgs),
}

#[derive(Args)]
struct QueryArg {
    /// Query text.
    #[arg(long, conflicts_with = "query_file")]
    query: Option<String>,
    /// File holding the query text.
    #[arg(long)]
    query_file: Option<PathBuf>,
}

impl QueryArg {
    fn text(&self) -> Result<Option<String>, CliError> {
        match (&self.query, &self.query_file) {
            (Some(q), _) => Ok(Some(q.clone())),
            (None, Some(p)) => Ok(Some(read(p)?)),
            (None, None) => Ok(None),
        }
    }

    fn required(&self) -> Result<String, CliError> {
        self.text()?.ok_or_else(|| CliError::Usage("one of --query or --query-file is required".into()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    List,
    Selectivity,
}

impl From<Order> for VisitOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::List => VisitOrder::ListOrder,
            Order::Selectivity => VisitOrder::Selectivity,
        }
    }
}

#[derive(Args)]
struct Tuning {
    /// Stop the decomposition at depth K and relax the rest.
    #[arg(long, value_name = "K")]
    early_stop: Option<usize>,
    /// Order in which constraints are branched on.
    #[arg(long, value_enum, default_value = "list")]
    order: Order,
}

impl Tuning {
    fn options(&self) -> BoundOptions {
        BoundOptions { early_stop_depth: self.early_stop, order: self.order.into(), ..BoundOptions::default() }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Constraint set JSON.
    #[arg(long)]
    pcs: PathBuf,
    #[command(flatten)]
    query: QueryArg,
    /// CSV of the rows that are present (header names schema attributes).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Skip malformed data rows instead of failing.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    tuning: Tuning,
    /// Use the per-constraint path; requires pairwise-disjoint predicates.
    #[arg(long, conflicts_with = "early_stop")]
    greedy: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    pcs: PathBuf,
    /// Restrict the cells to the query's WHERE region.
    #[command(flatten)]
    query: QueryArg,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    pcs: PathBuf,
    /// Check closure over the query's WHERE region instead of the domain.
    #[command(flatten)]
    query: QueryArg,
    /// Rows that should satisfy every constraint.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    lenient: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Naive,
    Gwe,
    Best,
}

#[derive(Args)]
struct JoinArgs {
    /// Join graph JSON: `{"relations": [{"name", "schema", "constraints"}], "distinct_rows"}`.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    query: QueryArg,
    #[arg(long, value_enum, default_value = "best")]
    method: Method,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON; the shipped synthetic setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to these baselines (repeatable).
    #[arg(long = "baseline", value_name = "NAME")]
    baselines: Vec<String>,
    /// Override every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of queries.
    #[arg(long)]
    queries: Option<usize>,
    /// Where to write the per-query CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    query: QueryArg,
    /// Check names and literal types against a schema JSON.
    #[arg(long, conflicts_with = "pcs")]
    schema: Option<PathBuf>,
    /// Take the schema from a constraint set instead.
    #[arg(long)]
    pcs: Option<PathBuf>,
    /// Add the canonical SQL form and a summary of the WHERE region.
    #[arg(long)]
    explain: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] rangebound::Error),
}

/// What a command produced: JSON for stdout, an optional human summary,
/// and the exit code its status implies.
struct Report {
    json: Value,
    human: String,
    code: u8,
}

const NOT_CLOSED: u8 = 3;
const INFEASIBLE: u8 = 4;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_pcs(path: &Path) -> Result<PcSet, CliError> {
    Ok(PcSet::from_json_str(&read(path)?)?)
}

fn load_rows(path: &Path, schema: &Arc<Schema>, lenient: bool) -> Result<Relation, CliError> {
    let mode = if lenient { IngestMode::Lenient } else { IngestMode::Strict };
    let ingested = ingest_csv(path, schema.clone(), mode)?;
    for s in &ingested.skipped {
        eprintln!("skipped line {}: {}", s.line, s.message);
    }
    Ok(ingested.relation)
}

fn status_code(ranges: &[&ResultRange]) -> u8 {
    if ranges.iter().any(|r| r.status == Status::NotClosed) {
        NOT_CLOSED
    } else if ranges.iter().any(|r| r.status == Status::InfeasibleConstraints) {
        INFEASIBLE
    } else {
        0
    }
}

fn describe(r: &ResultRange) -> String {
    let end = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v}"));
    format!("[{}, {}] {:?}", end(r.lower), end(r.upper), r.status)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("engine types serialize")
}

fn cmd_bound(a: &BoundArgs) -> Result<Report, CliError> {
    let set = load_pcs(&a.pcs)?;
    let query = parse_query(&a.query.required()?, Some(set.schema()))?;
    let rows = a.data.as_deref().map(|p| load_rows(p, set.schema(), a.lenient)).transpose()?;
    let out = if a.greedy {
        if rows.is_some() || query.group_by.is_some() {
            return Err(CliError::Usage("--greedy takes neither --data nor GROUP BY".into()));
        }
        BoundOutput::Single(greedy_disjoint(&set, &query)?)
    } else {
        bound_query(&query, &set, rows.as_ref(), &a.tuning.options())?
    };
    let human = match &out {
        BoundOutput::Single(r) => format!("{}\n", describe(r)),
        BoundOutput::Groups { groups } => groups.iter().map(|g| format!("{:<20} {}\n", g.group, describe(&g.range))).collect(),
    };
    Ok(Report { code: status_code(&out.ranges()), json: to_json(&out), human })
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<Report, CliError> {
    let set = load_pcs(&a.pcs)?;
    let clip = match a.query.text()? {
        Some(q) => parse_query(&q, Some(set.schema()))?.predicate,
        None => Some(rangebound::predicate::Predicate::always()),
    };
    let opts = DecomposeOptions { early_stop_depth: a.tuning.early_stop, order: a.tuning.order.into(), ..Default::default() };
    let d = match &clip {
        Some(p) => decompose(&set, Some(p), &opts)?,
        None => decompose(&set, Some(&contradiction(set.schema())), &opts)?,
    };
    let cells: Vec<Value> = d.cells.iter().map(|c| c.to_json(&set)).collect();
    let outside: Vec<Value> = d.outside.iter().map(|c| c.to_json(&set)).collect();
    let mut human = String::new();
    for c in &d.cells {
        let ids: Vec<&str> = c.covering.iter().map(|&j| set.get(j).id.as_str()).collect();
        human += &format!("{:<40} {}\n", ids.join(","), if c.forced_zero() { "empty" } else { "" });
    }
    human += &format!("{} cells, {} satisfiability calls\n", d.cells.len(), d.stats.sat_calls);
    Ok(Report { json: json!({ "cells": cells, "outside": outside, "stats": d.stats, "exact": d.is_exact() }), human, code: 0 })
}

/// A predicate nothing satisfies, for queries whose WHERE clause is
/// contradictory.
fn contradiction(schema: &Schema) -> rangebound::predicate::Predicate {
    let a = &schema.attributes()[0];
    match &a.domain {
        rangebound::schema::Domain::Numeric { .. } => {
            rangebound::predicate::Predicate::range(a.name.clone(), rangebound::predicate::Interval::new(1.0, 0.0, false, false))
        }
        rangebound::schema::Domain::Categorical { .. } => rangebound::predicate::Predicate::member(a.name.clone(), Vec::<String>::new()),
    }
}

fn cmd_check(a: &CheckArgs) -> Result<Report, CliError> {
    let set = load_pcs(&a.pcs)?;
    let predicate = match a.query.text()? {
        Some(q) => parse_query(&q, Some(set.schema()))?.predicate,
        None => None,
    };
    let closure = set.check_closure(predicate.as_ref())?;
    let count = QuerySpec::new(Aggregate::Count, None, "_");
    let feasible = match bound_query(&count, &set, None, &BoundOptions::default())? {
        BoundOutput::Single(r) => r.status != Status::InfeasibleConstraints,
        BoundOutput::Groups { .. } => unreachable!("no GROUP BY"),
    };
    let mut out = json!({
        "constraints": set.len(),
        "closed": closure.is_closed(),
        "feasible": feasible,
        "pairwise_disjoint": set.is_pairwise_disjoint(),
    });
    let mut human = format!("{} constraints, closed: {}, feasible: {feasible}\n", set.len(), closure.is_closed());
    if let Closure::Counterexample(t) = &closure {
        out["counterexample"] = t.to_json(set.schema());
        human += &format!("uncovered tuple: {}\n", t.to_json(set.schema()));
    }
    if let Some(path) = &a.data {
        let rows = load_rows(path, set.schema(), a.lenient)?;
        let violated = set.constraints().iter().filter_map(|pc| match satisfies(&rows, pc) {
            Ok(true) => None,
            Ok(false) => Some(Ok(pc.id.clone())),
            Err(e) => Some(Err(e)),
        });
        let violated: Vec<String> = violated.collect::<Result<_, _>>()?;
        human += &format!("{} rows, violated: {}\n", rows.len(), if violated.is_empty() { "none".into() } else { violated.join(", ") });
        out["data"] = json!({ "rows": rows.len(), "violated": violated });
    }
    let code = if !closure.is_closed() {
        NOT_CLOSED
    } else if !feasible {
        INFEASIBLE
    } else {
        0
    };
    Ok(Report { json: out, human, code })
}

fn cmd_join(a: &JoinArgs) -> Result<Report, CliError> {
    let graph: JoinGraph = serde_json::from_str(&read(&a.graph)?).map_err(rangebound::Error::from)?;
    let query = parse_query(&a.query.required()?, None)?;
    let method = match a.method {
        Method::Naive => JoinMethod::Naive,
        Method::Gwe => JoinMethod::Gwe,
        Method::Best => JoinMethod::Best,
    };
    let out = join_bound(&graph, &query, method, &BoundOptions::default())?;
    let mut human = format!("{}\n", describe(&out.range));
    if let Some(c) = &out.cover {
        human += &format!("cover {c:?}\n");
    }
    for n in &out.range.diagnostics.notes {
        human += &format!("note: {n}\n");
    }
    Ok(Report { code: status_code(&[&out.range]), json: to_json(&out), human })
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<Report, CliError> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&read(p)?).map_err(rangebound::Error::from)?,
        None => ExperimentConfig::synthetic(0),
    };
    if !a.baselines.is_empty() {
        cfg.baselines = a.baselines.iter().map(|b| b.parse::<Baseline>()).collect::<Result<_, _>>()?;
    }
    if let Some(s) = a.seed {
        cfg.scenario.seed = s;
        cfg.pc.seed = s;
        cfg.queries.seed = s;
    }
    if let Some(n) = a.queries {
        cfg.queries.count = n;
    }
    let out = run_experiment(&cfg)?;
    if let Some(path) = &a.out {
        let file = fs::File::create(path).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        out.write_csv(std::io::BufWriter::new(file))?;
    }
    let mut human = format!("{:<8} {:>10} {:>10} {:>12}\n", "baseline", "failures", "rate", "median over");
    for m in &out.report.baselines {
        let over = m.median_overestimation.map_or("-".into(), |v| format!("{v:.3}"));
        human += &format!("{:<8} {:>10} {:>10.4} {:>12}\n", m.baseline.name(), m.failures, m.failure_rate, over);
    }
    Ok(Report { json: to_json(&out.report), human, code: 0 })
}

fn cmd_parse(a: &ParseArgs) -> Result<Report, CliError> {
    let text = a.query.required()?;
    let schema = match (&a.schema, &a.pcs) {
        (Some(p), _) => Some(serde_json::from_str::<Schema>(&read(p)?).map_err(rangebound::Error::from)?),
        (None, Some(p)) => Some((**load_pcs(p)?.schema()).clone()),
        (None, None) => None,
    };
    let q = parse_query(&text, schema.as_ref())?;
    let canonical = pretty_print(&q);
    let json = if a.explain {
        let atoms = q.predicate.as_ref().map_or(0, |p| p.atoms.len());
        json!({
            "spec": q,
            "canonical": canonical,
            "matches_nothing": q.predicate.is_none(),
            "constrained_attributes": atoms,
        })
    } else {
        to_json(&q)
    };
    Ok(Report { json, human: format!("{canonical}\n"), code: 0 })
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Check(a) => cmd_check(a),
        Command::JoinBound(a) => cmd_join(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Parse(a) => cmd_parse(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| par::with_threads(cli.threads, || run(&cli)));
    match outcome {
        Ok(Ok(report)) => {
            let mut stdout = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&report.json).expect("JSON values serialize");
            if writeln!(stdout, "{text}").is_err() {
                return ExitCode::from(1);
            }
            if cli.pretty {
                eprint!("{}", report.human);
            }
            ExitCode::from(report.code)
        }
        Ok(Err(e)) => {
            eprintln!("rangebound: {e}");
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("rangebound: internal error");
            ExitCode::from(1)
        }
    }
}

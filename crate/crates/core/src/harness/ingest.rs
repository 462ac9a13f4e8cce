//! CSV ingestion into typed relations.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{Domain, Relation, Schema, Tuple, Value};
use crate::time::{parse_timestamp, DEFAULT_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Stop at the first bad row.
    #[default]
    Strict,
    /// Skip bad rows and report them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub relation: Relation,
    pub skipped: Vec<SkippedRow>,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: Arc<Schema>, mode: IngestMode) -> Result<Ingested> {
    ingest_reader(std::fs::File::open(path)?, schema, mode)
}

/// Reads a headed CSV whose columns include every schema attribute; extra
/// columns are ignored. Numeric cells accept numbers or timestamps.
pub fn ingest_reader(reader: impl Read, schema: Arc<Schema>, mode: IngestMode) -> Result<Ingested> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    let columns: Vec<usize> = schema
        .attributes()
        .iter()
        .map(|a| {
            header
                .iter()
                .position(|h| h == a.name)
                .ok_or_else(|| Error::Ingest { line: 1, message: format!("header lacks column `{}`", a.name) })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = columns
            .iter()
            .zip(schema.attributes())
            .map(|(&c, a)| {
                let text = record.get(c).unwrap_or("");
                let value = match &a.domain {
                    Domain::Numeric { .. } => text
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .or_else(|| parse_timestamp(text, DEFAULT_YEAR))
                        .map(Value::Num)
                        .ok_or_else(|| format!("`{text}` is not a number or timestamp for `{}`", a.name))?,
                    Domain::Categorical { .. } => Value::Cat(text.to_string()),
                };
                if a.domain.contains(&value) {
                    Ok(value)
                } else {
                    Err(format!("`{text}` lies outside the domain of `{}`", a.name))
                }
            })
            .collect::<std::result::Result<Vec<Value>, String>>();
        match (parsed, mode) {
            (Ok(values), _) => rows.push(Tuple(values)),
            (Err(message), IngestMode::Strict) => return Err(Error::Ingest { line, message }),
            (Err(message), IngestMode::Lenient) => skipped.push(SkippedRow { line, message }),
        }
    }
    Ok(Ingested { relation: Relation::new(schema, rows)?, skipped })
}

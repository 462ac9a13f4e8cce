//! The supported SQL subset: one aggregate over a conjunctive range
//! predicate with an optional categorical GROUP BY.

mod lexer;
mod parser;
mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::schema::{Domain, Schema};

pub use parser::{parse_query, TimestampFormat};
pub use pretty::pretty_print;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Aggregate {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Sum => "SUM",
            Aggregate::Count => "COUNT",
            Aggregate::Avg => "AVG",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
        }
    }

    pub fn from_name(name: &str) -> Option<Aggregate> {
        Some(match name.to_ascii_uppercase().as_str() {
            "SUM" => Aggregate::Sum,
            "COUNT" => Aggregate::Count,
            "AVG" => Aggregate::Avg,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            _ => return None,
        })
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed aggregate query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub aggregate: Aggregate,
    /// `None` stands for `*`.
    pub target: Option<String>,
    pub relations: Vec<String>,
    /// `None` when the WHERE clause is contradictory (matches nothing).
    pub predicate: Option<Predicate>,
    pub group_by: Option<String>,
}

impl QuerySpec {
    pub fn new(aggregate: Aggregate, target: Option<&str>, relation: &str) -> Self {
        QuerySpec {
            aggregate,
            target: target.map(str::to_string),
            relations: vec![relation.to_string()],
            predicate: Some(Predicate::always()),
            group_by: None,
        }
    }

    pub fn with_predicate(mut self, predicate: Option<Predicate>) -> Self {
        self.predicate = predicate;
        self
    }

    pub fn with_group_by(mut self, attr: &str) -> Self {
        self.group_by = Some(attr.to_string());
        self
    }

    /// Checks the query against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        match &self.target {
            None if self.aggregate != Aggregate::Count => return Err(Error::Semantic(format!("{}(*) is not supported", self.aggregate))),
            None => {}
            Some(t) => match schema.attribute(t) {
                None => return Err(Error::Semantic(format!("unknown attribute `{t}`"))),
                Some(a) if !a.domain.is_numeric() => {
                    return Err(Error::Semantic(format!("{} over categorical attribute `{t}`", self.aggregate)))
                }
                Some(_) => {}
            },
        }
        if let Some(p) = &self.predicate {
            p.validate(schema).map_err(|e| Error::Semantic(e.to_string()))?;
        }
        if let Some(g) = &self.group_by {
            match schema.attribute(g).map(|a| &a.domain) {
                None => return Err(Error::Semantic(format!("unknown attribute `{g}`"))),
                Some(Domain::Numeric { .. }) => {
                    return Err(Error::Semantic(format!("GROUP BY needs a categorical attribute, `{g}` is numeric")))
                }
                Some(Domain::Categorical { .. }) => {}
            }
        }
        Ok(())
    }
}

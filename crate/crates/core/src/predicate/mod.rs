//! Conjunctive predicates over ranges and categorical memberships, and an
//! exact satisfiability procedure for signed conjunctions of them.

mod grid;
mod interval;
mod region;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Domain, Schema, Tuple, Value};

pub use grid::{endpoint_grid, GridAxis};
pub use interval::Interval;
pub(crate) use interval::IntervalJson;
pub use region::{escape, residual_pieces, CatSet, Dim, Region};

/// A constraint on a single attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Atom {
    In {
        #[serde(rename = "in")]
        values: BTreeSet<String>,
    },
    Range(#[serde(with = "range_json")] Interval),
}

mod range_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Interval, IntervalJson};

    pub fn serialize<S: Serializer>(i: &Interval, s: S) -> Result<S::Ok, S::Error> {
        IntervalJson::from(*i).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Interval, D::Error> {
        IntervalJson::deserialize(d).map(Into::into)
    }
}

impl Atom {
    pub fn one_of<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Atom {
        Atom::In { values: values.into_iter().map(Into::into).collect() }
    }

    fn intersect(&self, other: &Atom) -> Option<Atom> {
        match (self, other) {
            (Atom::Range(a), Atom::Range(b)) => {
                let i = a.intersect(b);
                (!i.is_empty()).then_some(Atom::Range(i))
            }
            (Atom::In { values: a }, Atom::In { values: b }) => {
                let common: BTreeSet<String> = a.intersection(b).cloned().collect();
                (!common.is_empty()).then_some(Atom::In { values: common })
            }
            // A range and a membership set never describe the same attribute
            // consistently, so they share no point.
            _ => None,
        }
    }

    fn matches(&self, value: &Value) -> bool {
        match (self, value) {
            (Atom::Range(i), Value::Num(x)) => i.contains(*x),
            (Atom::In { values }, Value::Cat(s)) => values.contains(s),
            _ => false,
        }
    }
}

/// A conjunction of per-attribute atoms; attributes without an atom are
/// unconstrained and the empty conjunction is TRUE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    #[serde(default)]
    pub atoms: BTreeMap<String, Atom>,
}

impl Predicate {
    pub fn always() -> Self {
        Predicate::default()
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn with(mut self, attr: impl Into<String>, atom: Atom) -> Self {
        self.atoms.insert(attr.into(), atom);
        self
    }

    pub fn range(attr: impl Into<String>, interval: Interval) -> Self {
        Predicate::always().with(attr, Atom::Range(interval))
    }

    pub fn member<S: Into<String>>(attr: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Predicate::always().with(attr, Atom::one_of(values))
    }

    /// Checks attribute names, atom kinds, nonempty intervals and that
    /// membership sets are nonempty subsets of the domain.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (name, atom) in &self.atoms {
            let attr = schema.attribute(name).ok_or_else(|| Error::schema(format!("predicate references unknown attribute `{name}`")))?;
            match (atom, &attr.domain) {
                (Atom::Range(i), Domain::Numeric { .. }) => {
                    if i.is_empty() {
                        return Err(Error::constraint(format!("empty interval on `{name}`")));
                    }
                }
                (Atom::In { values }, Domain::Categorical { values: dom }) => {
                    if values.is_empty() {
                        return Err(Error::constraint(format!("empty membership set on `{name}`")));
                    }
                    if let Some(v) = values.iter().find(|v| !dom.contains(v)) {
                        return Err(Error::constraint(format!("`{v}` is not in the domain of `{name}`")));
                    }
                }
                _ => return Err(Error::schema(format!("atom kind does not match attribute `{name}`"))),
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, schema: &Schema, tuple: &Tuple) -> Result<bool> {
        for (name, atom) in &self.atoms {
            let i = schema.require(name)?;
            if !atom.matches(tuple.get(i)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Compiles the predicate into a dense region clipped to the domain.
    pub fn to_region(&self, schema: &Schema) -> Result<Region> {
        let mut region = Region::domain(schema);
        for (name, atom) in &self.atoms {
            let i = schema.require(name)?;
            let dim = match (atom, region.dim(i)) {
                (Atom::Range(iv), Dim::Num(dom)) => Dim::Num(dom.intersect(iv)),
                (Atom::In { values }, Dim::Cat(dom)) => {
                    let mut set = CatSet::empty(dom.domain_size());
                    for v in values {
                        if let Some(k) = schema.category(i, v) {
                            set.insert(k as usize);
                        }
                    }
                    Dim::Cat(set)
                }
                _ => return Err(Error::schema(format!("atom kind does not match attribute `{name}`"))),
            };
            region.set_dim(i, dim);
        }
        Ok(region)
    }

    /// Attributes constrained by this predicate restricted to `keep`.
    pub fn restrict<'a>(&self, keep: impl Fn(&str) -> bool + 'a) -> Predicate {
        Predicate { atoms: self.atoms.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }
}

/// Per-attribute intersection of two predicates; `None` marks the EMPTY
/// predicate.
pub fn conjoin(p: &Predicate, q: &Predicate) -> Option<Predicate> {
    let mut atoms = p.atoms.clone();
    for (name, atom) in &q.atoms {
        let merged = match atoms.get(name) {
            Some(existing) => existing.intersect(atom)?,
            None => atom.clone(),
        };
        atoms.insert(name.clone(), merged);
    }
    Some(Predicate { atoms })
}

/// Positive and negated predicates, optionally clipped to a query region.
#[derive(Debug, Clone, Default)]
pub struct SignedConjunction {
    pub positives: Vec<Predicate>,
    pub negatives: Vec<Predicate>,
    pub clip: Option<Predicate>,
}

impl SignedConjunction {
    fn compile(&self, schema: &Schema) -> Result<(Region, Vec<Region>)> {
        let mut base = match &self.clip {
            Some(c) => c.to_region(schema)?,
            None => Region::domain(schema),
        };
        for p in &self.positives {
            base = base.intersect(&p.to_region(schema)?);
        }
        let negatives = self.negatives.iter().map(|n| n.to_region(schema)).collect::<Result<_>>()?;
        Ok((base, negatives))
    }

    pub fn is_satisfiable(&self, schema: &Schema) -> Result<bool> {
        Ok(self.witness(schema)?.is_some())
    }

    /// A domain tuple satisfying every positive and the clip but no negative.
    pub fn witness(&self, schema: &Schema) -> Result<Option<Tuple>> {
        let (base, negatives) = self.compile(schema)?;
        let refs: Vec<&Region> = negatives.iter().collect();
        Ok(escape(&base, &refs).map(|piece| schema.decode(&piece.representative())))
    }
}

/// True iff some tuple of the domain satisfies `sc`.
pub fn is_satisfiable(sc: &SignedConjunction, schema: &Schema) -> Result<bool> {
    sc.is_satisfiable(schema)
}

//! Predicate-constraints and sets of them.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predicate::{conjoin, escape, Interval, IntervalJson, Predicate, Region};
use crate::schema::{Domain, Relation, Schema, Tuple};

/// Row-count window `k_l <= count <= k_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frequency {
    pub kl: u64,
    pub ku: u64,
}

impl Frequency {
    pub fn new(kl: u64, ku: u64) -> Self {
        Frequency { kl, ku }
    }

    pub fn exactly(k: u64) -> Self {
        Frequency { kl: k, ku: k }
    }

    pub fn at_most(ku: u64) -> Self {
        Frequency { kl: 0, ku }
    }

    pub fn admits(&self, count: u64) -> bool {
        self.kl <= count && count <= self.ku
    }
}

/// Per-attribute value ranges; attributes not listed default to their domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueConstraint(pub BTreeMap<String, Interval>);

impl ValueConstraint {
    pub fn none() -> Self {
        ValueConstraint::default()
    }

    pub fn with(mut self, attr: impl Into<String>, lo: f64, hi: f64) -> Self {
        self.0.insert(attr.into(), Interval::closed(lo, hi));
        self
    }

    pub fn get(&self, attr: &str) -> Option<&Interval> {
        self.0.get(attr)
    }

    /// The constraint as a region clipped to the domain.
    pub fn to_region(&self, schema: &Schema) -> Result<Region> {
        let mut p = Predicate::always();
        for (k, v) in &self.0 {
            p = p.with(k.clone(), crate::predicate::Atom::Range(*v));
        }
        p.to_region(schema)
    }
}

impl Serialize for ValueConstraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<&String, IntervalJson> = self.0.iter().map(|(k, v)| (k, (*v).into())).collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValueConstraint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = BTreeMap::<String, IntervalJson>::deserialize(d)?;
        Ok(ValueConstraint(m.into_iter().map(|(k, v)| (k, v.into())).collect()))
    }
}

/// The triple (ψ, ν, κ): every missing row matching `psi` satisfies `nu`, and
/// the number of such rows lies in `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateConstraint {
    pub id: String,
    #[serde(default)]
    pub psi: Predicate,
    #[serde(default)]
    pub nu: ValueConstraint,
    pub kappa: Frequency,
}

impl PredicateConstraint {
    pub fn new(id: impl Into<String>, psi: Predicate, nu: ValueConstraint, kappa: Frequency) -> Self {
        PredicateConstraint { id: id.into(), psi, nu, kappa }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        self.psi.validate(schema).map_err(|e| Error::constraint(format!("`{}`: {e}", self.id)))?;
        for (name, iv) in &self.nu.0 {
            let attr = schema
                .attribute(name)
                .ok_or_else(|| Error::schema(format!("`{}`: value constraint on unknown attribute `{name}`", self.id)))?;
            let Domain::Numeric { lo, hi } = attr.domain else {
                return Err(Error::constraint(format!("`{}`: value constraint on categorical attribute `{name}`", self.id)));
            };
            if iv.is_empty() {
                return Err(Error::constraint(format!("`{}`: empty value range on `{name}`", self.id)));
            }
            if !iv.is_within(&Interval::closed(lo, hi)) {
                return Err(Error::constraint(format!("`{}`: value range on `{name}` leaves the domain [{lo}, {hi}]", self.id)));
            }
        }
        if self.kappa.kl > self.kappa.ku {
            return Err(Error::constraint(format!("`{}`: frequency window ({}, {}) has k_l > k_u", self.id, self.kappa.kl, self.kappa.ku)));
        }
        Ok(())
    }
}

/// True iff every row matching ψ satisfies ν and the match count is inside κ.
pub fn satisfies(relation: &Relation, pc: &PredicateConstraint) -> Result<bool> {
    let schema = relation.schema();
    let psi = pc.psi.to_region(schema)?;
    let nu = pc.nu.to_region(schema)?;
    Ok(satisfies_compiled(&relation.encoded(), &psi, &nu, pc.kappa))
}

fn satisfies_compiled(rows: &[Vec<f64>], psi: &Region, nu: &Region, kappa: Frequency) -> bool {
    let mut count = 0u64;
    for row in rows {
        if psi.contains_encoded(row) {
            if !nu.contains_encoded(row) {
                return false;
            }
            count += 1;
        }
    }
    kappa.admits(count)
}

pub fn satisfies_set(relation: &Relation, set: &PcSet) -> Result<bool> {
    let rows = relation.encoded();
    Ok(set.constraints.iter().enumerate().all(|(j, pc)| satisfies_compiled(&rows, &set.regions[j], &set.nu_regions[j], pc.kappa)))
}

/// Outcome of a closure check.
#[derive(Debug, Clone, PartialEq)]
pub enum Closure {
    Closed,
    Counterexample(Tuple),
}

impl Closure {
    pub fn is_closed(&self) -> bool {
        matches!(self, Closure::Closed)
    }
}

/// An ordered, validated list of predicate-constraints over one schema.
#[derive(Debug, Clone)]
pub struct PcSet {
    schema: Arc<Schema>,
    constraints: Vec<PredicateConstraint>,
    regions: Vec<Region>,
    nu_regions: Vec<Region>,
    domain_closure: OnceLock<Closure>,
    disjoint: OnceLock<Option<(usize, usize)>>,
}

impl PcSet {
    pub fn new(schema: Arc<Schema>, constraints: Vec<PredicateConstraint>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::constraint("a predicate-constraint set needs at least one member"));
        }
        let mut ids = HashSet::new();
        for pc in &constraints {
            if !ids.insert(pc.id.as_str()) {
                return Err(Error::constraint(format!("duplicate id `{}`", pc.id)));
            }
            pc.validate(&schema)?;
        }
        let regions = constraints.iter().map(|pc| pc.psi.to_region(&schema)).collect::<Result<_>>()?;
        let nu_regions = constraints.iter().map(|pc| pc.nu.to_region(&schema)).collect::<Result<_>>()?;
        Ok(PcSet { schema, constraints, regions, nu_regions, domain_closure: OnceLock::new(), disjoint: OnceLock::new() })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn constraints(&self) -> &[PredicateConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn get(&self, j: usize) -> &PredicateConstraint {
        &self.constraints[j]
    }

    /// Compiled ψ region of constraint `j`.
    pub fn region(&self, j: usize) -> &Region {
        &self.regions[j]
    }

    /// Compiled ν region of constraint `j` (domain where unconstrained).
    pub fn nu_region(&self, j: usize) -> &Region {
        &self.nu_regions[j]
    }

    /// Keeps the constraints at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PcSet> {
        PcSet::new(self.schema.clone(), indices.iter().map(|&j| self.constraints[j].clone()).collect())
    }

    pub fn map_constraints(&self, f: impl FnMut(&PredicateConstraint) -> PredicateConstraint) -> Result<PcSet> {
        PcSet::new(self.schema.clone(), self.constraints.iter().map(f).collect())
    }

    /// Whether every domain tuple (inside `query` when given) matches some ψ.
    pub fn check_closure(&self, query: Option<&Predicate>) -> Result<Closure> {
        match query {
            None => Ok(self.domain_closure.get_or_init(|| self.closure_in(&Region::domain(&self.schema))).clone()),
            Some(q) => Ok(self.closure_in(&q.to_region(&self.schema)?)),
        }
    }

    pub(crate) fn closure_in(&self, base: &Region) -> Closure {
        let negatives: Vec<&Region> = self.regions.iter().filter(|r| r.intersects(base)).collect();
        match escape(base, &negatives) {
            None => Closure::Closed,
            Some(piece) => Closure::Counterexample(self.schema.decode(&piece.representative())),
        }
    }

    /// The first pair of constraints whose predicates overlap, if any.
    pub fn overlapping_pair(&self) -> Option<(usize, usize)> {
        *self.disjoint.get_or_init(|| {
            let n = self.regions.len();
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).find(|&(i, j)| self.regions[i].intersects(&self.regions[j]))
        })
    }

    pub fn is_pairwise_disjoint(&self) -> bool {
        self.overlapping_pair().is_none()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PcSetJson { schema: (*self.schema).clone(), constraints: self.constraints.clone() })
            .expect("pc sets serialize")
    }

    pub fn from_json_str(text: &str) -> Result<PcSet> {
        let json: PcSetJson = serde_json::from_str(text)?;
        PcSet::new(Arc::new(json.schema), json.constraints)
    }
}

#[derive(Serialize, Deserialize)]
struct PcSetJson {
    schema: Schema,
    constraints: Vec<PredicateConstraint>,
}

impl Serialize for PcSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PcSetJson { schema: (*self.schema).clone(), constraints: self.constraints.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PcSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = PcSetJson::deserialize(d)?;
        PcSet::new(Arc::new(json.schema), json.constraints).map_err(serde::de::Error::custom)
    }
}

/// Direct product of two constraints over schemas with disjoint attribute
/// names: conjoined predicates, concatenated value ranges, multiplied windows.
pub fn direct_product(
    schema_a: &Schema,
    pc_a: &PredicateConstraint,
    schema_b: &Schema,
    pc_b: &PredicateConstraint,
) -> Result<(Schema, PredicateConstraint)> {
    let schema = schema_a.concat(schema_b)?;
    let psi = conjoin(&pc_a.psi, &pc_b.psi).expect("predicates over disjoint attributes always conjoin");
    let mut nu = pc_a.nu.clone();
    nu.0.extend(pc_b.nu.0.iter().map(|(k, v)| (k.clone(), *v)));
    let kappa = Frequency::new(pc_a.kappa.kl * pc_b.kappa.kl, pc_a.kappa.ku.saturating_mul(pc_b.kappa.ku));
    Ok((schema, PredicateConstraint::new(format!("{}*{}", pc_a.id, pc_b.id), psi, nu, kappa)))
}

//! Schemas, attribute domains, tuples and relations.
//!
//! Every predicate and constraint in the crate is interpreted against a
//! [`Schema`]. Numeric domains are closed `[lo, hi]` ranges of doubles and
//! categorical domains are finite, ordered value lists. Time attributes are
//! numeric (seconds since the Unix epoch).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Numeric { lo: f64, hi: f64 },
    Categorical { values: Vec<String> },
}

impl Domain {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Domain::Numeric { .. })
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Numeric { lo, hi }, Value::Num(v)) => *lo <= *v && *v <= *hi,
            (Domain::Categorical { values }, Value::Cat(s)) => values.iter().any(|v| v == s),
            _ => false,
        }
    }

    /// True when every value of `self` is also a value of `other`.
    pub fn is_within(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::Numeric { lo, hi }, Domain::Numeric { lo: olo, hi: ohi }) => olo <= lo && hi <= ohi,
            (Domain::Categorical { values }, Domain::Categorical { values: ov }) => values.iter().all(|v| ov.contains(v)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub domain: Domain,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Attribute { name: name.into(), domain: Domain::Numeric { lo, hi } }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Attribute { name: name.into(), domain: Domain::Categorical { values: values.into_iter().map(Into::into).collect() } }
    }
}

/// An ordered list of uniquely named attributes.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "SchemaJson", into = "SchemaJson")]
pub struct Schema {
    attributes: Vec<Attribute>,
    index: HashMap<String, usize>,
    categories: Vec<HashMap<String, u32>>,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut index = HashMap::with_capacity(attributes.len());
        let mut categories = Vec::with_capacity(attributes.len());
        for (i, attr) in attributes.iter().enumerate() {
            if index.insert(attr.name.clone(), i).is_some() {
                return Err(Error::schema(format!("duplicate attribute `{}`", attr.name)));
            }
            let mut cats = HashMap::new();
            match &attr.domain {
                Domain::Numeric { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite()) {
                        return Err(Error::schema(format!("attribute `{}` needs a bounded domain", attr.name)));
                    }
                    if lo > hi {
                        return Err(Error::schema(format!("attribute `{}` has lo {lo} > hi {hi}", attr.name)));
                    }
                }
                Domain::Categorical { values } => {
                    if values.is_empty() {
                        return Err(Error::schema(format!("attribute `{}` has an empty value set", attr.name)));
                    }
                    for (k, v) in values.iter().enumerate() {
                        if cats.insert(v.clone(), k as u32).is_some() {
                            return Err(Error::schema(format!("attribute `{}` lists `{v}` twice", attr.name)));
                        }
                    }
                }
            }
            categories.push(cats);
        }
        Ok(Schema { attributes, index, categories })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.index_of(name).map(|i| &self.attributes[i])
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::schema(format!("unknown attribute `{name}`")))
    }

    /// Position of `value` in the categorical domain of attribute `attr`.
    pub fn category(&self, attr: usize, value: &str) -> Option<u32> {
        self.categories[attr].get(value).copied()
    }

    /// Concatenation of two schemas with disjoint attribute names.
    pub fn concat(&self, other: &Schema) -> Result<Schema> {
        let mut attrs = self.attributes.clone();
        for a in &other.attributes {
            if self.index.contains_key(&a.name) {
                return Err(Error::schema(format!("attribute `{}` appears on both sides", a.name)));
            }
            attrs.push(a.clone());
        }
        Schema::new(attrs)
    }

    /// Union of two schemas where attributes sharing a name are unified
    /// (natural-join semantics). Shared numeric domains are intersected and
    /// shared categorical domains keep the common values in `self`'s order.
    pub fn unify(&self, other: &Schema) -> Result<Schema> {
        let mut attrs = self.attributes.clone();
        for b in &other.attributes {
            match self.index_of(&b.name) {
                None => attrs.push(b.clone()),
                Some(i) => {
                    let merged = match (&attrs[i].domain, &b.domain) {
                        (Domain::Numeric { lo, hi }, Domain::Numeric { lo: blo, hi: bhi }) => {
                            let (lo, hi) = (lo.max(*blo), hi.min(*bhi));
                            if lo > hi {
                                return Err(Error::schema(format!("shared attribute `{}` has disjoint domains", b.name)));
                            }
                            Domain::Numeric { lo, hi }
                        }
                        (Domain::Categorical { values }, Domain::Categorical { values: bv }) => {
                            let common: Vec<String> = values.iter().filter(|v| bv.contains(v)).cloned().collect();
                            if common.is_empty() {
                                return Err(Error::schema(format!("shared attribute `{}` has disjoint domains", b.name)));
                            }
                            Domain::Categorical { values: common }
                        }
                        _ => return Err(Error::schema(format!("shared attribute `{}` changes kind", b.name))),
                    };
                    attrs[i].domain = merged;
                }
            }
        }
        Schema::new(attrs)
    }

    /// Encodes a tuple as one `f64` per attribute, categorical values as
    /// their domain position. Returns `None` for values outside the domain.
    pub fn encode(&self, tuple: &Tuple) -> Option<Vec<f64>> {
        if tuple.0.len() != self.attributes.len() {
            return None;
        }
        tuple
            .0
            .iter()
            .enumerate()
            .map(|(i, v)| match (&self.attributes[i].domain, v) {
                (Domain::Numeric { .. }, Value::Num(x)) => Some(*x),
                (Domain::Categorical { .. }, Value::Cat(s)) => self.category(i, s).map(f64::from),
                _ => None,
            })
            .collect()
    }

    pub fn decode(&self, encoded: &[f64]) -> Tuple {
        Tuple(
            encoded
                .iter()
                .zip(&self.attributes)
                .map(|(x, a)| match &a.domain {
                    Domain::Numeric { .. } => Value::Num(*x),
                    Domain::Categorical { values } => Value::Cat(values[*x as usize].clone()),
                })
                .collect(),
        )
    }
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes
    }
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.attributes.iter().map(|a| &a.name)).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Numeric,
    Categorical,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeJson {
    name: String,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaJson {
    attributes: Vec<AttributeJson>,
}

impl TryFrom<SchemaJson> for Schema {
    type Error = Error;

    fn try_from(json: SchemaJson) -> Result<Self> {
        let attrs = json
            .attributes
            .into_iter()
            .map(|a| {
                let domain = match a.kind {
                    Kind::Numeric => match (a.lo, a.hi) {
                        (Some(lo), Some(hi)) => Domain::Numeric { lo, hi },
                        _ => return Err(Error::schema(format!("numeric attribute `{}` needs lo and hi", a.name))),
                    },
                    Kind::Categorical => match a.values {
                        Some(values) => Domain::Categorical { values },
                        None => return Err(Error::schema(format!("categorical attribute `{}` needs values", a.name))),
                    },
                };
                Ok(Attribute { name: a.name, domain })
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(attrs)
    }
}

impl From<Schema> for SchemaJson {
    fn from(schema: Schema) -> Self {
        SchemaJson {
            attributes: schema
                .attributes
                .into_iter()
                .map(|a| match a.domain {
                    Domain::Numeric { lo, hi } => {
                        AttributeJson { name: a.name, kind: Kind::Numeric, lo: Some(lo), hi: Some(hi), values: None }
                    }
                    Domain::Categorical { values } => {
                        AttributeJson { name: a.name, kind: Kind::Categorical, lo: None, hi: None, values: Some(values) }
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Cat(s.to_string())
    }
}

/// One value per schema attribute, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple(pub Vec<Value>);

impl Tuple {
    pub fn get(&self, i: usize) -> &Value {
        &self.0[i]
    }

    /// Renders the tuple as a `{name: value}` JSON object.
    pub fn to_json(&self, schema: &Schema) -> serde_json::Value {
        let map =
            schema.attributes().iter().zip(&self.0).map(|(a, v)| (a.name.clone(), serde_json::to_value(v).unwrap_or_default())).collect();
        serde_json::Value::Object(map)
    }
}

/// True iff every value lies in its attribute's domain.
pub fn validate_tuple(schema: &Schema, tuple: &Tuple) -> Result<bool> {
    if tuple.0.len() != schema.len() {
        return Err(Error::schema(format!("tuple has {} values, schema has {} attributes", tuple.0.len(), schema.len())));
    }
    Ok(schema.attributes().iter().zip(&tuple.0).all(|(a, v)| a.domain.contains(v)))
}

/// A multiset of tuples over a schema.
#[derive(Debug, Clone)]
pub struct Relation {
    schema: Arc<Schema>,
    rows: Vec<Tuple>,
}

impl Relation {
    pub fn new(schema: Arc<Schema>, rows: Vec<Tuple>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if !validate_tuple(&schema, row)? {
                return Err(Error::schema(format!("row {i} lies outside the schema domain")));
            }
        }
        Ok(Relation { schema, rows })
    }

    pub fn empty(schema: Arc<Schema>) -> Self {
        Relation { schema, rows: Vec::new() }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Tuple] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in the dense `f64` encoding of [`Schema::encode`].
    pub fn encoded(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| self.schema.encode(r).expect("relation rows are validated")).collect()
    }

    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> Relation {
        Relation { schema: self.schema.clone(), rows: indices.into_iter().map(|i| self.rows[i].clone()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn price_schema() -> Schema {
        Schema::new(vec![Attribute::numeric("price", 0.0, 1000.0)]).unwrap()
    }

    #[test]
    fn numeric_membership() {
        let s = price_schema();
        assert!(validate_tuple(&s, &Tuple(vec![3.02.into()])).unwrap());
        assert!(!validate_tuple(&s, &Tuple(vec![(-1.0).into()])).unwrap());
    }

    #[test]
    fn categorical_membership() {
        let s = Schema::new(vec![Attribute::categorical("branch", ["Chicago", "NewYork"])]).unwrap();
        assert!(!validate_tuple(&s, &Tuple(vec!["Trenton".into()])).unwrap());
        assert!(validate_tuple(&s, &Tuple(vec!["Chicago".into()])).unwrap());
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let s = price_schema();
        assert!(validate_tuple(&s, &Tuple(vec![1.0.into(), 2.0.into()])).is_err());
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(Schema::new(vec![Attribute::numeric("x", 2.0, 1.0)]).is_err());
        assert!(Schema::new(vec![Attribute::categorical::<&str>("c", [])]).is_err());
        assert!(Schema::new(vec![Attribute::numeric("x", 0.0, 1.0), Attribute::numeric("x", 0.0, 1.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"attributes":[{"name":"price","kind":"numeric","lo":0.0,"hi":10.0},
            {"name":"branch","kind":"categorical","values":["A","B"]}]}"#;
        let s: Schema = serde_json::from_str(text).unwrap();
        assert_eq!(s.len(), 2);
        let back: Schema = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn widening_preserves_validity() {
        let narrow = price_schema();
        let wide = Schema::new(vec![Attribute::numeric("price", -5.0, 5000.0)]).unwrap();
        assert!(narrow.attributes()[0].domain.is_within(&wide.attributes()[0].domain));
        for x in [0.0, 3.5, 1000.0] {
            let t = Tuple(vec![x.into()]);
            assert!(validate_tuple(&narrow, &t).unwrap());
            assert!(validate_tuple(&wide, &t).unwrap());
        }
    }

    #[test]
    fn unify_intersects_shared_domains() {
        let a = Schema::new(vec![Attribute::numeric("k", 0.0, 10.0), Attribute::numeric("x", 0.0, 1.0)]).unwrap();
        let b = Schema::new(vec![Attribute::numeric("k", 5.0, 20.0), Attribute::numeric("y", 0.0, 1.0)]).unwrap();
        let u = a.unify(&b).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(u.attribute("k").unwrap().domain, Domain::Numeric { lo: 5.0, hi: 10.0 });
        assert!(a.concat(&b).is_err());
    }
}

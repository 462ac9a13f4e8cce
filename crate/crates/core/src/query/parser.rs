//! Recursive-descent parser for
//! `SELECT agg ( attr | * | 1 ) FROM ident (, ident)* [WHERE atom (AND atom)*] [GROUP BY ident] [;]`
//! where an atom is `attr op literal` or `attr IN ('v', ...)`.

use std::collections::BTreeMap;

use super::lexer::{tokenize, CmpOp, Tok, Token};
use super::{Aggregate, QuerySpec};
use crate::error::{Error, Result};
use crate::predicate::{Atom, Interval, Predicate};
use crate::schema::{Domain, Schema};
use crate::time::{parse_timestamp, DEFAULT_YEAR};

/// How date literals without a year are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimestampFormat {
    pub default_year: i32,
}

impl Default for TimestampFormat {
    fn default() -> Self {
        TimestampFormat { default_year: DEFAULT_YEAR }
    }
}

const KEYWORDS: [&str; 9] = ["SELECT", "FROM", "WHERE", "AND", "GROUP", "BY", "OR", "NOT", "IN"];

/// Parses a query. With a schema, attribute names and literal types are
/// checked; without one, literal types decide between ranges and
/// memberships.
pub fn parse_query(text: &str, schema: Option<&Schema>) -> Result<QuerySpec> {
    parse_query_with(text, schema, TimestampFormat::default())
}

pub fn parse_query_with(text: &str, schema: Option<&Schema>, ts: TimestampFormat) -> Result<QuerySpec> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, schema, ts };
    let q = p.query()?;
    if let Some(s) = schema {
        q.validate(s)?;
    }
    Ok(q)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    schema: Option<&'a Schema>,
    ts: TimestampFormat,
}

enum Literal {
    Num(f64),
    Text(String),
    Stamp(String),
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset, message: message.into() })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            let t = self.peek().clone();
            self.error(t.offset, format!("expected {kw}, found {}", describe(&t.tok)))
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.peek().clone();
        if t.tok == want {
            self.bump();
            Ok(())
        } else {
            self.error(t.offset, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(w) if !KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)) => {
                self.bump();
                Ok(w)
            }
            other => self.error(t.offset, format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn query(&mut self) -> Result<QuerySpec> {
        self.keyword("SELECT")?;
        let agg_tok = self.peek().clone();
        let aggregate = match &agg_tok.tok {
            Tok::Ident(w) => match Aggregate::from_name(w) {
                Some(a) => a,
                None => return self.error(agg_tok.offset, format!("unsupported aggregate `{w}`")),
            },
            other => return self.error(agg_tok.offset, format!("expected an aggregate, found {}", describe(other))),
        };
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        let arg = self.peek().clone();
        let target = match arg.tok {
            Tok::Star => None,
            Tok::Number(1.0) => None,
            Tok::Ident(_) => Some(self.ident("an attribute")?),
            other => return self.error(arg.offset, format!("expected an attribute, `*` or `1`, found {}", describe(&other))),
        };
        if target.is_none() {
            if aggregate != Aggregate::Count {
                return self.error(arg.offset, format!("{aggregate} needs an attribute"));
            }
            self.bump();
        }
        self.expect(Tok::RParen, "`)`")?;

        self.keyword("FROM")?;
        let mut relations = vec![self.ident("a relation name")?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            relations.push(self.ident("a relation name")?);
        }

        let mut predicate = Some(Predicate::always());
        if self.is_keyword("WHERE") {
            self.bump();
            predicate = self.conjunction()?;
        }

        let mut group_by = None;
        if self.is_keyword("GROUP") {
            self.bump();
            self.keyword("BY")?;
            group_by = Some(self.ident("a grouping attribute")?);
        }
        if self.peek().tok == Tok::Semi {
            self.bump();
        }
        let t = self.peek().clone();
        if t.tok != Tok::End {
            if self.is_keyword("OR") {
                return self.error(t.offset, "OR is not supported; predicates must be conjunctive");
            }
            return self.error(t.offset, format!("unexpected {}", describe(&t.tok)));
        }
        Ok(QuerySpec { aggregate, target, relations, predicate, group_by })
    }

    fn conjunction(&mut self) -> Result<Option<Predicate>> {
        let mut atoms: BTreeMap<String, Atom> = BTreeMap::new();
        let mut empty = false;
        loop {
            let (attr, atom) = self.atom()?;
            match atoms.get(&attr) {
                None => {
                    atoms.insert(attr, atom);
                }
                Some(prev) => match intersect(prev, &atom) {
                    Ok(Some(a)) => {
                        atoms.insert(attr, a);
                    }
                    Ok(None) => empty = true,
                    Err(msg) => return Err(Error::Semantic(format!("`{attr}`: {msg}"))),
                },
            }
            if self.is_keyword("AND") {
                self.bump();
            } else {
                break;
            }
        }
        Ok((!empty).then_some(Predicate { atoms }))
    }

    fn atom(&mut self) -> Result<(String, Atom)> {
        if self.is_keyword("NOT") {
            let off = self.peek().offset;
            return self.error(off, "NOT is not supported; predicates must be conjunctive");
        }
        let attr = self.ident("an attribute")?;
        if self.is_keyword("IN") {
            return self.membership(attr);
        }
        let op_tok = self.bump();
        let Tok::Op(op) = op_tok.tok else {
            if let Tok::Ident(w) = &op_tok.tok {
                if w.eq_ignore_ascii_case("OR") {
                    return self.error(op_tok.offset, "OR is not supported; predicates must be conjunctive");
                }
            }
            return self.error(op_tok.offset, format!("expected a comparison, found {}", describe(&op_tok.tok)));
        };
        let lit_tok = self.bump();
        let lit = match lit_tok.tok {
            Tok::Number(v) => Literal::Num(v),
            Tok::Str(s) => Literal::Text(s),
            Tok::Stamp(s) => Literal::Stamp(s),
            other => return self.error(lit_tok.offset, format!("expected a literal, found {}", describe(&other))),
        };
        let numeric = match self.schema {
            Some(s) => match s.attribute(&attr) {
                None => return Err(Error::Semantic(format!("unknown attribute `{attr}`"))),
                Some(a) => Some(matches!(a.domain, Domain::Numeric { .. })),
            },
            None => None,
        };
        let atom = match (lit, numeric) {
            (Literal::Num(v), Some(true) | None) => Atom::Range(range(op, v)),
            (Literal::Stamp(s), Some(true) | None) => Atom::Range(range(op, self.stamp(&s)?)),
            (Literal::Text(s), Some(true)) => match parse_timestamp(&s, self.ts.default_year) {
                Some(v) => Atom::Range(range(op, v)),
                None => return Err(Error::Semantic(format!("`{attr}` is numeric but `{s}` is neither a number nor a timestamp"))),
            },
            (Literal::Text(s), None) if op != CmpOp::Eq => match parse_timestamp(&s, self.ts.default_year) {
                Some(v) => Atom::Range(range(op, v)),
                None => return Err(Error::Semantic(format!("`{s}` can only be compared with `=`"))),
            },
            (Literal::Text(s), Some(false) | None) => {
                if op != CmpOp::Eq {
                    return Err(Error::Semantic(format!("categorical attribute `{attr}` only supports `=`")));
                }
                Atom::one_of([s])
            }
            (Literal::Num(_) | Literal::Stamp(_), Some(false)) => {
                return Err(Error::Semantic(format!("categorical attribute `{attr}` compared with a number")))
            }
        };
        Ok((attr, atom))
    }

    fn membership(&mut self, attr: String) -> Result<(String, Atom)> {
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        let mut values = Vec::new();
        loop {
            let t = self.bump();
            match t.tok {
                Tok::Str(s) => values.push(s),
                other => return self.error(t.offset, format!("expected a quoted value, found {}", describe(&other))),
            }
            if self.peek().tok == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        if let Some(a) = self.schema.and_then(|s| s.attribute(&attr)) {
            if matches!(a.domain, Domain::Numeric { .. }) {
                return Err(Error::Semantic(format!("`{attr}` is numeric; IN takes categorical values")));
            }
        } else if self.schema.is_some() {
            return Err(Error::Semantic(format!("unknown attribute `{attr}`")));
        }
        Ok((attr, Atom::one_of(values)))
    }

    fn stamp(&self, s: &str) -> Result<f64> {
        parse_timestamp(s, self.ts.default_year).ok_or_else(|| Error::Semantic(format!("invalid timestamp `{s}`")))
    }
}

fn range(op: CmpOp, v: f64) -> Interval {
    match op {
        CmpOp::Eq => Interval::point(v),
        CmpOp::Lt => Interval::at_most(v, true),
        CmpOp::Le => Interval::at_most(v, false),
        CmpOp::Gt => Interval::at_least(v, true),
        CmpOp::Ge => Interval::at_least(v, false),
    }
}

fn intersect(a: &Atom, b: &Atom) -> std::result::Result<Option<Atom>, &'static str> {
    match (a, b) {
        (Atom::Range(x), Atom::Range(y)) => {
            let i = x.intersect(y);
            Ok((!i.is_empty()).then_some(Atom::Range(i)))
        }
        (Atom::In { values: x }, Atom::In { values: y }) => {
            let common: std::collections::BTreeSet<String> = x.intersection(y).cloned().collect();
            Ok((!common.is_empty()).then_some(Atom::In { values: common }))
        }
        _ => Err("compared with both numbers and strings"),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Number(v) => format!("number {v}"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::Stamp(s) => format!("timestamp {s}"),
        Tok::Star => "`*`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semi => "`;`".into(),
        Tok::Op(_) => "a comparison".into(),
        Tok::End => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Attribute;

    fn sales() -> Schema {
        Schema::new(vec![
            Attribute::numeric("utc", 1_573_430_400.0, 1_573_603_199.0),
            Attribute::categorical("branch", ["Chicago", "NewYork"]),
            Attribute::numeric("price", 0.0, 1000.0),
        ])
        .unwrap()
    }

    #[test]
    fn paper_query() {
        let q = parse_query("SELECT SUM(price) FROM sales WHERE utc >= Nov-11 0:00 AND utc <= Nov-13 0:00", Some(&sales())).unwrap();
        assert_eq!(q.aggregate, Aggregate::Sum);
        assert_eq!(q.target.as_deref(), Some("price"));
        let p = q.predicate.unwrap();
        assert_eq!(p.atoms["utc"], Atom::Range(Interval::closed(1_573_430_400.0, 1_573_603_200.0)));
    }

    #[test]
    fn count_one_and_group_by() {
        let q = parse_query("select count(1) from Vote group by cand", None).unwrap();
        assert_eq!(q.aggregate, Aggregate::Count);
        assert_eq!(q.target, None);
        assert_eq!(q.group_by.as_deref(), Some("cand"));
    }

    #[test]
    fn or_is_rejected() {
        let e = parse_query("SELECT SUM(price) FROM s WHERE price OR 1", None).unwrap_err();
        assert!(matches!(e, Error::Syntax { offset: 37, .. }), "{e}");
        let e = parse_query("SELECT SUM(price) FROM s WHERE price > 1 OR price < 0", None).unwrap_err();
        assert!(matches!(e, Error::Syntax { offset: 41, .. }), "{e}");
    }

    #[test]
    fn atoms_intersect() {
        let q = parse_query("SELECT SUM(x) FROM t WHERE x >= 2 AND x <= 5", None).unwrap();
        assert_eq!(q.predicate.unwrap().atoms["x"], Atom::Range(Interval::closed(2.0, 5.0)));
        let q = parse_query("SELECT SUM(x) FROM t WHERE x > 5 AND x < 3", None).unwrap();
        assert_eq!(q.predicate, None);
    }

    #[test]
    fn semantic_errors() {
        let s = sales();
        assert!(matches!(parse_query("SELECT SUM(branch) FROM t", Some(&s)), Err(Error::Semantic(_))));
        assert!(matches!(parse_query("SELECT SUM(nope) FROM t", Some(&s)), Err(Error::Semantic(_))));
        assert!(matches!(parse_query("SELECT SUM(price) FROM t WHERE branch < 'x'", Some(&s)), Err(Error::Semantic(_))));
        assert!(matches!(parse_query("SELECT SUM(price) FROM t GROUP BY price", Some(&s)), Err(Error::Semantic(_))));
        assert!(matches!(parse_query("SELECT SUM(price) FROM t WHERE branch = 3", Some(&s)), Err(Error::Semantic(_))));
        assert!(matches!(parse_query("SELECT SUM(*) FROM t", None), Err(Error::Syntax { offset: 11, .. })));
    }
}

use super::QuerySpec;
use crate::predicate::{Atom, Interval};

/// Canonical SQL text for a query. Timestamps come out as epoch seconds.
pub fn pretty_print(q: &QuerySpec) -> String {
    let mut out = format!("SELECT {}({}) FROM {}", q.aggregate, q.target.as_deref().unwrap_or("*"), q.relations.join(", "));
    let mut atoms = Vec::new();
    match &q.predicate {
        Some(p) => {
            for (attr, atom) in &p.atoms {
                match atom {
                    Atom::Range(i) => range_atoms(attr, i, &mut atoms),
                    Atom::In { values } => {
                        let quoted: Vec<String> = values.iter().map(|v| format!("'{}'", v.replace('\'', "''"))).collect();
                        atoms.push(match quoted.as_slice() {
                            [one] => format!("{attr} = {one}"),
                            _ => format!("{attr} IN ({})", quoted.join(", ")),
                        });
                    }
                }
            }
        }
        None => {
            // A contradiction on any attribute reproduces the empty predicate.
            let attr = q.target.as_deref().or(q.group_by.as_deref()).unwrap_or("_");
            atoms.push(format!("{attr} > 0 AND {attr} < 0"));
        }
    }
    if !atoms.is_empty() {
        out.push_str(" WHERE ");
        out.push_str(&atoms.join(" AND "));
    }
    if let Some(g) = &q.group_by {
        out.push_str(" GROUP BY ");
        out.push_str(g);
    }
    out
}

fn range_atoms(attr: &str, i: &Interval, out: &mut Vec<String>) {
    if i.lo == i.hi && !i.lo_open && !i.hi_open {
        out.push(format!("{attr} = {}", i.lo));
        return;
    }
    if i.lo.is_finite() {
        out.push(format!("{attr} {} {}", if i.lo_open { ">" } else { ">=" }, i.lo));
    }
    if i.hi.is_finite() {
        out.push(format!("{attr} {} {}", if i.hi_open { "<" } else { "<=" }, i.hi));
    }
}

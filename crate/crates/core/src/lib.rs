//! Deterministic result ranges for aggregate queries over tables with
//! missing rows described by predicate-constraints.

pub mod baselines;
pub mod bound;
pub mod decompose;
pub mod error;
pub mod harness;
pub mod join;
pub mod opt;
pub mod par;
pub mod pc;
pub mod predicate;
pub mod query;
pub mod schema;
pub mod time;

pub use error::{Error, Result};

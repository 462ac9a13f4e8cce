//! Synthetic data and missing-row scenarios.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Attribute, Relation, Schema, Tuple, Value};

/// 2019-11-01 00:00:00 UTC.
pub const SYNTHETIC_START: f64 = 1_572_566_400.0;
/// Thirty days later, minus one second.
pub const SYNTHETIC_END: f64 = SYNTHETIC_START + 30.0 * 86_400.0 - 1.0;
pub const SYNTHETIC_VALUE_MAX: f64 = 10_000.0;

const DEVICES: [&str; 8] = ["d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7"];
const REGIONS: [&str; 4] = ["east", "north", "south", "west"];

pub fn synthetic_schema() -> Schema {
    Schema::new(vec![
        Attribute::numeric("value", 0.0, SYNTHETIC_VALUE_MAX),
        Attribute::numeric("utc", SYNTHETIC_START, SYNTHETIC_END),
        Attribute::categorical("device", DEVICES),
        Attribute::categorical("region", REGIONS),
    ])
    .expect("static schema")
}

/// Log-normal values in cents, uniform timestamps in seconds, and two
/// categoricals; the device scales the value so the columns are correlated.
pub fn synthetic_dataset(rows: usize, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(3.0, 1.0).expect("valid parameters");
    let data = (0..rows)
        .map(|_| {
            let d = rng.random_range(0..DEVICES.len());
            let raw = dist.sample(&mut rng) * (1.0 + d as f64 / 4.0);
            let value = (raw.min(SYNTHETIC_VALUE_MAX) * 100.0).round() / 100.0;
            let utc = SYNTHETIC_START + rng.random_range(0..=(SYNTHETIC_END - SYNTHETIC_START) as u64) as f64;
            let region = REGIONS[rng.random_range(0..REGIONS.len())];
            Tuple(vec![Value::Num(value), Value::Num(utc), Value::from(DEVICES[d]), Value::from(region)])
        })
        .collect();
    Relation::new(Arc::new(synthetic_schema()), data).expect("generated rows lie in the domain")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalMode {
    /// Drop the rows with the largest aggregate values.
    CorrelatedTop,
    Random,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub data: Relation,
    /// Dense encoding of `data`.
    pub rows: Vec<Vec<f64>>,
    /// Sorted indices of the missing rows.
    pub missing: Vec<usize>,
    pub fraction: f64,
    pub mode: RemovalMode,
    pub seed: u64,
}

impl Scenario {
    pub fn missing_relation(&self) -> Relation {
        self.data.subset(self.missing.iter().copied())
    }

    pub fn missing_rows(&self) -> Vec<Vec<f64>> {
        self.missing.iter().map(|&i| self.rows[i].clone()).collect()
    }

    /// Encoded rows that are still present.
    pub fn present_rows(&self) -> Vec<Vec<f64>> {
        let mut gone = self.missing.iter().peekable();
        let mut out = Vec::with_capacity(self.rows.len() - self.missing.len());
        for (i, r) in self.rows.iter().enumerate() {
            if gone.peek() == Some(&&i) {
                gone.next();
            } else {
                out.push(r.clone());
            }
        }
        out
    }
}

/// Marks `round(fraction · n)` rows of `data` as missing.
pub fn make_scenario(data: Relation, attr: &str, fraction: f64, mode: RemovalMode, seed: u64) -> Result<Scenario> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("missing fraction {fraction} outside [0, 1)")));
    }
    let a = data.schema().require(attr)?;
    let rows = data.encoded();
    let k = (fraction * rows.len() as f64).round() as usize;
    let mut missing: Vec<usize> = match mode {
        RemovalMode::CorrelatedTop => {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&i, &j| rows[j][a].total_cmp(&rows[i][a]).then(i.cmp(&j)));
            order.truncate(k);
            order
        }
        RemovalMode::Random => index::sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), k).into_vec(),
    };
    missing.sort_unstable();
    Ok(Scenario { data, rows, missing, fraction, mode, seed })
}

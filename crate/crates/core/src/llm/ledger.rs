//! Exact cost accounting.
//!
//! Rates are stored as integer nano-dollars per 1000 tokens, so
//! `tokens × rate` is an exact pico-dollar amount and no rounding happens
//! until a value is rendered.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelConfig;

const NANO_PER_DOLLAR: f64 = 1e9;
const PICO_PER_DOLLAR: f64 = 1e12;

/// Price of 1000 tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate {
    nano_dollars_per_1k: u64,
}

impl Rate {
    pub const ZERO: Rate = Rate { nano_dollars_per_1k: 0 };

    pub fn from_nano_per_1k(nano: u64) -> Self {
        Self { nano_dollars_per_1k: nano }
    }

    /// `dollars` per 1000 tokens, rounded to the nearest nano-dollar.
    pub fn per_1k(dollars: f64) -> Result<Self, String> {
        if !dollars.is_finite() || dollars < 0.0 {
            return Err(format!("rate must be a finite non-negative number, got {dollars}"));
        }
        let nano = (dollars * NANO_PER_DOLLAR).round();
        if nano > u64::MAX as f64 {
            return Err(format!("rate {dollars} is out of range"));
        }
        Ok(Self { nano_dollars_per_1k: nano as u64 })
    }

    pub fn nano_per_1k(self) -> u64 {
        self.nano_dollars_per_1k
    }

    pub fn as_f64(self) -> f64 {
        self.nano_dollars_per_1k as f64 / NANO_PER_DOLLAR
    }

    /// Exact cost of `tokens` at this rate.
    pub fn cost(self, tokens: u64) -> Dollars {
        Dollars::from_pico(tokens as u128 * self.nano_dollars_per_1k as u128)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Rate::per_1k(v).map_err(serde::de::Error::custom)
    }
}

/// An exact dollar amount in pico-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dollars {
    pico: u128,
}

impl Dollars {
    pub const ZERO: Dollars = Dollars { pico: 0 };

    pub fn from_pico(pico: u128) -> Self {
        Self { pico }
    }

    pub fn pico(self) -> u128 {
        self.pico
    }

    pub fn as_f64(self) -> f64 {
        self.pico as f64 / PICO_PER_DOLLAR
    }

    /// Rounded to whole cents, half away from zero.
    pub fn cents(self) -> u128 {
        (self.pico + 5_000_000_000) / 10_000_000_000
    }
}

impl std::ops::Add for Dollars {
    type Output = Dollars;
    fn add(self, rhs: Dollars) -> Dollars {
        Dollars { pico: self.pico + rhs.pico }
    }
}

impl std::iter::Sum for Dollars {
    fn sum<I: Iterator<Item = Dollars>>(iter: I) -> Dollars {
        iter.fold(Dollars::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Dollars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.pico / 1_000_000_000_000;
        let frac = (self.pico % 1_000_000_000_000) / 1_000_000;
        write!(f, "${whole}.{frac:06}")
    }
}

impl Serialize for Dollars {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Dollars {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v < 0.0 {
            return Err(serde::de::Error::custom("dollar amount must be non-negative"));
        }
        Ok(Dollars::from_pico((v * 1e12).round() as u128))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl Usage {
    pub fn cost(&self, input_rate: Rate, output_rate: Rate) -> Dollars {
        input_rate.cost(self.input_tokens) + output_rate.cost(self.output_tokens)
    }

    pub fn add(&mut self, other: &Usage) {
        self.calls += other.calls;
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
    }
}

/// Per-model usage totals, safe to share between concurrent attempts.
#[derive(Debug, Default)]
pub struct CostLedger {
    usage: Mutex<BTreeMap<String, Usage>>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, model: &str, input_tokens: u64, output_tokens: u64) {
        let mut map = self.usage.lock().unwrap_or_else(|e| e.into_inner());
        let entry = map.entry(model.to_string()).or_default();
        entry.calls += 1;
        entry.input_tokens += input_tokens;
        entry.output_tokens += output_tokens;
    }

    pub fn usage(&self, model: &str) -> Usage {
        let map = self.usage.lock().unwrap_or_else(|e| e.into_inner());
        map.get(model).copied().unwrap_or_default()
    }

    pub fn snapshot(&self) -> BTreeMap<String, Usage> {
        self.usage.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Dollars spent on `model` so far.
pub fn ledger_cost(ledger: &CostLedger, model: &ModelConfig) -> Dollars {
    ledger.usage(&model.name).cost(model.input_rate, model.output_rate)
}

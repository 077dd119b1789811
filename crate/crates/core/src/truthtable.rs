//! Resistor banks and the bit interpretation of resistor pairs.
//!
//! Indices are zero-based in the API. A pair `(i, j)` always means Alice
//! holds `R_i` and Bob holds `R_j`. The public table is
//!
//! ```text
//! bit(i, j) = parity(i + j) XOR [i < j]
//! ```
//!
//! which is antisymmetric (`bit(i, j) = ¬bit(j, i)`) and flips whenever one
//! index moves to a neighbour without crossing the other. With two resistors
//! it reduces to the classic convention `bit(H, L) = 1`, `bit(L, H) = 0`.
//! The formula is unchanged by a common shift of both indices, so one-based
//! labels read the same table.
//!
//! Keyed schedules orient the public table per slot: a slot either uses the
//! table as is or with every bit inverted, as decided by a pseudorandom
//! stream keyed with the previously shared key.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Publicly known, strictly increasing resistor set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ResistorBank {
    values: Vec<f64>,
}

impl ResistorBank {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::parameter(format!(
                "a resistor bank needs at least 2 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::parameter("bank resistances must be positive and finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parameter("bank resistances must be strictly increasing"));
        }
        Ok(ResistorBank { values })
    }

    /// `n` resistors spaced geometrically between `low` and `high`.
    pub fn geometric(low: f64, high: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::parameter("a resistor bank needs at least 2 values"));
        }
        let ratio = (high / low).powf(1.0 / (n - 1) as f64);
        let mut values: Vec<f64> = (0..n).map(|k| low * ratio.powi(k as i32)).collect();
        values[n - 1] = high;
        ResistorBank::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn smallest_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn index_of(&self, resistance: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == resistance)
    }
}

impl TryFrom<Vec<f64>> for ResistorBank {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ResistorBank::new(values)
    }
}

impl From<ResistorBank> for Vec<f64> {
    fn from(bank: ResistorBank) -> Self {
        bank.values
    }
}

/// Outcome of looking a pair up in a truth table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpretation {
    Bit(bool),
    /// Both ends hold the same resistor; the slot carries no secure bit.
    Insecure,
}

impl Interpretation {
    pub fn bit(self) -> Option<bool> {
        match self {
            Interpretation::Bit(b) => Some(b),
            Interpretation::Insecure => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    n: usize,
    /// Inverts every entry of the public construction.
    inverted: bool,
}

impl TruthTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    pub fn inverted(self) -> TruthTable {
        TruthTable {
            inverted: !self.inverted,
            ..self
        }
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::contract(format!(
                "pair ({i}, {j}) out of range for a table over {} resistors",
                self.n
            )));
        }
        Ok(())
    }

    pub fn bit_of(&self, i: usize, j: usize) -> Result<Option<bool>> {
        Ok(self.interpret(i, j)?.bit())
    }

    pub fn interpret(&self, i: usize, j: usize) -> Result<Interpretation> {
        self.check(i, j)?;
        if i == j {
            return Ok(Interpretation::Insecure);
        }
        let bit = ((i + j) % 2 == 1) ^ (i < j) ^ self.inverted;
        Ok(Interpretation::Bit(bit))
    }

    /// Audit map keyed `"i,j"` with one-based indices.
    pub fn to_map(&self) -> BTreeMap<String, u8> {
        let mut map = BTreeMap::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if let Ok(Interpretation::Bit(b)) = self.interpret(i, j) {
                    map.insert(format!("{},{}", i + 1, j + 1), b as u8);
                }
            }
        }
        map
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_map()).expect("string map serializes")
    }
}

pub fn build_public_table(n: usize) -> Result<TruthTable> {
    if n < 2 {
        return Err(Error::parameter(format!("truth table needs n ≥ 2, got {n}")));
    }
    Ok(TruthTable { n, inverted: false })
}

/// Free-function form of [`TruthTable::interpret`].
pub fn interpret(pair: (usize, usize), table: &TruthTable) -> Result<Interpretation> {
    table.interpret(pair.0, pair.1)
}

/// Parses a key written as a string of `0`/`1` characters.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::parameter(format!("key contains non-bit character {other:?}"))),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Per-slot table orientations derived from a previously shared key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedSchedule {
    base: TruthTable,
    orientation: Vec<bool>,
    /// Hex prefix of the key digest, for provenance only.
    pub key_id: String,
}

impl KeyedSchedule {
    pub fn len(&self) -> usize {
        self.orientation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientation.is_empty()
    }

    pub fn table_for(&self, slot: usize) -> Result<TruthTable> {
        match self.orientation.get(slot) {
            Some(&flip) if flip => Ok(self.base.inverted()),
            Some(_) => Ok(self.base),
            None => Err(Error::configuration(format!(
                "keyed schedule exhausted: slot {slot} requested, {} derived",
                self.orientation.len()
            ))),
        }
    }

    pub fn orientations(&self) -> &[bool] {
        &self.orientation
    }
}

fn key_digest(prior_key: &[bool], n: usize) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"kljn/keyed-schedule");
    hasher.update((n as u64).to_le_bytes());
    hasher.update((prior_key.len() as u64).to_le_bytes());
    let packed: Vec<u8> = prior_key
        .chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k)))
        .collect();
    hasher.update(&packed);
    hasher.finalize().into()
}

pub fn derive_keyed_schedule(prior_key: &[bool], n_slots: usize, n: usize) -> Result<KeyedSchedule> {
    if prior_key.is_empty() {
        return Err(Error::parameter("keyed schedule needs a non-empty prior key"));
    }
    if n_slots == 0 {
        return Err(Error::parameter("keyed schedule needs at least one slot"));
    }
    let base = build_public_table(n)?;
    let digest = key_digest(prior_key, n);
    let mut rng = ChaCha20Rng::from_seed(digest);
    let orientation = (0..n_slots).map(|_| rng.random::<bool>()).collect();
    let key_id = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Ok(KeyedSchedule {
        base,
        orientation,
        key_id,
    })
}

//! Mean-square level prediction, situation classification and
//! cross-correlation estimators.
//!
//! Classification works on the pair `(ln⟨U²⟩, ln⟨I²⟩)` with equal weight on
//! both coordinates. The estimator of a mean-square over `N` Gaussian samples
//! has relative standard deviation `√(2/N)` regardless of level, which makes
//! log space the natural metric. Margins are the gap between the distance to
//! the runner-up level and the distance to the winner, in log units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseParams;
use crate::truthtable::ResistorBank;

/// Predicted mean-square channel levels for a two-resistor set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    pub ms_u_ll: f64,
    pub ms_u_mid: f64,
    pub ms_u_hh: f64,
    pub ms_i_ll: f64,
    pub ms_i_mid: f64,
    pub ms_i_hh: f64,
}

/// Channel situation seen from mean-square observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    LL,
    MID,
    HH,
}

impl Situation {
    /// Situation label of an index pair in a bank of `n` resistors.
    ///
    /// Distinct indices are `MID`. Banks with more than two resistors have
    /// several insecure equal pairs; those in the lower half of the bank are
    /// labelled `LL`, the rest `HH`.
    pub fn of_pair(i: usize, j: usize, n: usize) -> Situation {
        if i != j {
            Situation::MID
        } else if 2 * i < n {
            Situation::LL
        } else {
            Situation::HH
        }
    }

    pub fn is_secure(self) -> bool {
        self == Situation::MID
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Situation::LL => "LL",
            Situation::MID => "MID",
            Situation::HH => "HH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SituationClass {
    pub label: Situation,
    /// Distance gap to the nearest competing level; 0 when the inputs are degenerate.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Mean of elementwise products.
    pub raw: f64,
    /// `raw / (rms(x)·rms(y))`; NaN when either series is identically zero.
    pub normalized: f64,
}

pub fn predict_levels(r_low: f64, r_high: f64, params: &NoiseParams) -> Result<LevelTable> {
    if !(r_low.is_finite() && r_high.is_finite() && r_low > 0.0) {
        return Err(Error::parameter(format!(
            "resistances must be positive and finite, got {r_low}, {r_high}"
        )));
    }
    if r_low >= r_high {
        return Err(Error::parameter(format!(
            "r_low must be below r_high, got {r_low} ≥ {r_high}"
        )));
    }
    let p = params.unit_power();
    let sum = r_low + r_high;
    Ok(LevelTable {
        ms_u_ll: p * r_low / 2.0,
        ms_u_mid: p * r_low * r_high / sum,
        ms_u_hh: p * r_high / 2.0,
        ms_i_ll: p / (2.0 * r_low),
        ms_i_mid: p / sum,
        ms_i_hh: p / (2.0 * r_high),
    })
}

pub fn mean_square(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::contract("mean square of an empty series"));
    }
    Ok(series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64)
}

/// Euclidean distance between measured and predicted levels in log space.
///
/// Non-positive or non-finite inputs give `+∞`.
pub fn log_distance(ms_u: f64, ms_i: f64, pred_u: f64, pred_i: f64) -> f64 {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !(ok(ms_u) && ok(ms_i)) {
        return f64::INFINITY;
    }
    let du = ms_u.ln() - pred_u.ln();
    let di = ms_i.ln() - pred_i.ln();
    (du * du + di * di).sqrt()
}

/// Index of the smallest entry and the gap to the second smallest.
///
/// The gap is 0 when the winner is not finite.
pub(crate) fn nearest_with_margin(distances: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (k, d) in distances.iter().enumerate() {
        if *d < distances[best] {
            best = k;
        }
    }
    let runner_up = distances
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != best)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    let margin = if distances[best].is_finite() {
        runner_up - distances[best]
    } else {
        0.0
    };
    (best, margin)
}

pub fn classify_situation(ms_u: f64, ms_i: f64, levels: &LevelTable) -> SituationClass {
    let d = [
        log_distance(ms_u, ms_i, levels.ms_u_ll, levels.ms_i_ll),
        log_distance(ms_u, ms_i, levels.ms_u_mid, levels.ms_i_mid),
        log_distance(ms_u, ms_i, levels.ms_u_hh, levels.ms_i_hh),
    ];
    let (k, margin) = nearest_with_margin(&d);
    let label = [Situation::LL, Situation::MID, Situation::HH][k];
    SituationClass { label, margin }
}

pub fn cross_correlation(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "cross-correlation length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::contract("cross-correlation needs at least 2 samples"));
    }
    let n = x.len() as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let raw = sxy / n;
    let denom = (sxx / n).sqrt() * (syy / n).sqrt();
    let normalized = if denom > 0.0 { raw / denom } else { f64::NAN };
    Ok(Correlation { raw, normalized })
}

/// Acceptance bound on a normalized correlation under the zero-correlation null.
pub fn independence_threshold(n_samples: usize, sigmas: f64) -> f64 {
    sigmas / (n_samples as f64).sqrt()
}

/// Result of classifying against every unordered index pair of a bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairClass {
    pub low: usize,
    pub high: usize,
    pub margin: f64,
}

impl PairClass {
    pub fn situation(&self, n: usize) -> Situation {
        Situation::of_pair(self.low, self.high, n)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.low == index || self.high == index
    }

    /// The other member of the pair, if `index` belongs to it.
    pub fn partner(&self, index: usize) -> Option<usize> {
        if self.low == index {
            Some(self.high)
        } else if self.high == index {
            Some(self.low)
        } else {
            None
        }
    }
}

/// Level predictions for every resistor pair of a bank.
///
/// Pair `(i, j)` connects `R_i` at one end and `R_j` at the other, giving
/// `⟨U²⟩ = P·R_i·R_j/(R_i + R_j)` and `⟨I²⟩ = P/(R_i + R_j)` with
/// `P = 4kT_eff·Δf`. Sum and product of the pair are recoverable from the
/// two levels, so every unordered pair has a distinct prediction; the
/// ordering within a pair is invisible.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLevels {
    bank: ResistorBank,
    unit_power: f64,
}

impl PairLevels {
    pub fn new(bank: &ResistorBank, params: &NoiseParams) -> Result<Self> {
        params.validate()?;
        Ok(PairLevels {
            bank: bank.clone(),
            unit_power: params.unit_power(),
        })
    }

    pub fn bank(&self) -> &ResistorBank {
        &self.bank
    }

    pub fn predict(&self, i: usize, j: usize) -> (f64, f64) {
        self.predict_resistances(self.bank.get(i), self.bank.get(j))
    }

    pub fn predict_resistances(&self, r_i: f64, r_j: f64) -> (f64, f64) {
        let sum = r_i + r_j;
        (self.unit_power * r_i * r_j / sum, self.unit_power / sum)
    }

    pub fn distance(&self, ms_u: f64, ms_i: f64, i: usize, j: usize) -> f64 {
        let (u, c) = self.predict(i, j);
        log_distance(ms_u, ms_i, u, c)
    }

    /// Nearest unordered pair over the whole bank.
    pub fn classify(&self, ms_u: f64, ms_i: f64) -> PairClass {
        let n = self.bank.len();
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        let mut d = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                pairs.push((i, j));
                d.push(self.distance(ms_u, ms_i, i, j));
            }
        }
        let (k, margin) = nearest_with_margin(&d);
        PairClass {
            low: pairs[k].0,
            high: pairs[k].1,
            margin,
        }
    }

    /// Log distances to the pairs `(own, j)` for every `j` in the bank.
    pub fn conditional_distances(&self, ms_u: f64, ms_i: f64, own: usize) -> Vec<f64> {
        (0..self.bank.len())
            .map(|j| self.distance(ms_u, ms_i, own, j))
            .collect()
    }
}

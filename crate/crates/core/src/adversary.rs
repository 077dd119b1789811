//! Passive eavesdropper models.
//!
//! Eve sees the line observables of a window at the start of the slot and
//! uses the same level estimators as the honest parties. On an ideal wire
//! the two line ends are a single node and carry no directional
//! information, so every bit guess there is a coin flip. A series wire
//! resistance `R_w` makes the larger resistor's end slightly noisier:
//! `⟨U_a²⟩ − ⟨U_b²⟩ = P·R_w²·(R_a − R_b)/(R_a + R_b + R_w)²`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::noise::{NoiseParams, RngStream};
use crate::protocol::ChannelTrace;
use crate::stats::{classify_situation, log_distance, LevelTable, PairLevels, Situation};
use crate::truthtable::{ResistorBank, TruthTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    pub slot: usize,
    pub situation_guess: Situation,
    pub bit_guess: Option<bool>,
    /// Estimated probability that the bit guess is right; without a bit
    /// guess, the normalized likelihood of the situation guess.
    pub confidence: f64,
    pub observed_window: usize,
    /// Guessed `(alice_index, bob_index)`, when the model identifies one.
    pub pair_guess: Option<(usize, usize)>,
    /// The bit guess is a coin flip.
    pub coin: bool,
}

fn check_window(channel: &ChannelTrace, window: usize) -> Result<()> {
    if window == 0 || window > channel.len() {
        return Err(Error::contract(format!(
            "window {window} outside 1..={} samples",
            channel.len()
        )));
    }
    Ok(())
}

struct WindowStats {
    ms_u_a: f64,
    ms_u_b: f64,
    ms_i: f64,
    /// Mean of `u_a² − u_b²` and its standard error.
    diff: f64,
    diff_se: f64,
}

impl WindowStats {
    fn new(channel: &ChannelTrace, window: usize) -> Self {
        let (mut sa, mut sb, mut si, mut sd, mut sdd) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..window {
            let a = channel.u_end_a[k] * channel.u_end_a[k];
            let b = channel.u_end_b[k] * channel.u_end_b[k];
            let d = a - b;
            sa += a;
            sb += b;
            si += channel.i_ch[k] * channel.i_ch[k];
            sd += d;
            sdd += d * d;
        }
        let w = window as f64;
        let diff = sd / w;
        let var = if window > 1 { ((sdd / w - diff * diff) * w / (w - 1.0)).max(0.0) } else { 0.0 };
        WindowStats {
            ms_u_a: sa / w,
            ms_u_b: sb / w,
            ms_i: si / w,
            diff,
            diff_se: (var / w).sqrt(),
        }
    }

    fn ms_u(&self) -> f64 {
        0.5 * (self.ms_u_a + self.ms_u_b)
    }
}

fn coin(stream: &RngStream) -> bool {
    stream.child("coin").rng().random::<bool>()
}

fn situation_confidence(margin: f64) -> f64 {
    if margin.is_finite() {
        1.0 / (1.0 + (-margin).exp())
    } else {
        0.5
    }
}

/// Level classification over the window plus a coin flip on mixed slots.
pub fn eve_passive_ideal(
    channel: &ChannelTrace,
    levels: &LevelTable,
    window: usize,
    stream: &RngStream,
) -> Result<EveReport> {
    check_window(channel, window)?;
    let s = WindowStats::new(channel, window);
    let class = classify_situation(s.ms_u(), s.ms_i, levels);
    let mid = class.label == Situation::MID;
    Ok(EveReport {
        slot: 0,
        situation_guess: class.label,
        bit_guess: if mid { Some(coin(stream)) } else { None },
        confidence: if mid { 0.5 } else { situation_confidence(class.margin) },
        observed_window: window,
        pair_guess: None,
        coin: mid,
    })
}

/// Attributes the noisier line end to the larger resistor.
///
/// The unordered pair comes from level classification; the orientation from
/// the sign of the mean-square difference between the ends, with confidence
/// `Φ(|z|)`. On an ideal wire the orientation is a coin flip with
/// confidence 0.5. Without a table the bit is a coin flip as well.
pub fn eve_wire_resistance(
    channel: &ChannelTrace,
    bank: &ResistorBank,
    params: &NoiseParams,
    table: Option<&TruthTable>,
    window: usize,
    stream: &RngStream,
) -> Result<EveReport> {
    check_window(channel, window)?;
    let s = WindowStats::new(channel, window);
    let pair = PairLevels::new(bank, params)?.classify(s.ms_u(), s.ms_i);
    let situation = pair.situation(bank.len());
    let mut report = EveReport {
        slot: 0,
        situation_guess: situation,
        bit_guess: None,
        confidence: situation_confidence(pair.margin),
        observed_window: window,
        pair_guess: Some((pair.low, pair.high)),
        coin: false,
    };
    if pair.low == pair.high {
        return Ok(report);
    }
    let (orientation, confidence) = if channel.is_ideal() || s.diff_se == 0.0 {
        (coin(&stream.child("orientation")), 0.5)
    } else {
        let z = s.diff / s.diff_se;
        (z > 0.0, Normal::standard().cdf(z.abs()))
    };
    // orientation = Alice's end is the noisier one, so she holds the larger resistor
    let guess = if orientation { (pair.high, pair.low) } else { (pair.low, pair.high) };
    report.pair_guess = Some(guess);
    report.confidence = confidence;
    match table {
        Some(t) => {
            report.bit_guess = t.bit_of(guess.0, guess.1)?;
            report.coin = channel.is_ideal();
        }
        None => {
            report.bit_guess = Some(coin(stream));
            report.confidence = 0.5;
            report.coin = true;
        }
    }
    Ok(report)
}

/// Mean squares `(⟨U_a²⟩, ⟨U_b²⟩, ⟨I²⟩)` at the two ends of a line.
pub fn line_levels(r_a: f64, r_b: f64, r_w: f64, unit_power: f64) -> (f64, f64, f64) {
    let s = r_a + r_b + r_w;
    let end = |near: f64, far: f64| unit_power * (near * (far + r_w) * (far + r_w) + far * near * near) / (s * s);
    (end(r_a, r_b), end(r_b, r_a), unit_power * (r_a + r_b) / (s * s))
}

/// Maximum-likelihood identification of the ordered resistor pair.
///
/// Each ordered pair `(i, j)` is scored under a Gaussian approximation:
/// log mean-squares of voltage and current carry variance `2/w`, and the
/// end-to-end mean-square difference is compared against its prediction in
/// units of its standard error. Mirror pairs tie on an ideal wire and the
/// orientation is then a coin flip. The bit comes from `table` when Eve
/// knows it, from a coin otherwise.
pub fn eve_exact_pair_guess(
    channel: &ChannelTrace,
    bank: &ResistorBank,
    params: &NoiseParams,
    table: Option<&TruthTable>,
    window: usize,
    stream: &RngStream,
) -> Result<EveReport> {
    check_window(channel, window)?;
    if bank.len() < 2 {
        return Err(Error::contract("pair identification needs at least two resistors"));
    }
    params.validate()?;
    let s = WindowStats::new(channel, window);
    let p = params.unit_power();
    let w = window as f64;
    let use_diff = !channel.is_ideal() && s.diff_se > 0.0;
    let n = bank.len();
    let mut scores = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (ua, ub, ic) = line_levels(bank.get(i), bank.get(j), channel.r_w, p);
            let d = log_distance(s.ms_u(), s.ms_i, 0.5 * (ua + ub), ic);
            let mut score = if d.is_finite() { w / 4.0 * d * d } else { f64::INFINITY };
            if use_diff {
                let z = (s.diff - (ua - ub)) / s.diff_se;
                score += 0.5 * z * z;
            }
            scores.push(((i, j), score));
        }
    }
    let best_score = scores.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let mut best = scores.iter().find(|x| x.1 == best_score).unwrap().0;
    if !best_score.is_finite() {
        best = (0, 0);
    }
    let (i, j) = best;
    if !use_diff && i != j && coin(&stream.child("orientation")) {
        best = (j, i);
    }
    let total: f64 = scores.iter().map(|x| (best_score - x.1).exp()).sum();
    let likelihood = if best_score.is_finite() { 1.0 / total } else { 0.0 };
    let situation = Situation::of_pair(best.0, best.1, n);
    let mut report = EveReport {
        slot: 0,
        situation_guess: situation,
        bit_guess: None,
        confidence: likelihood,
        observed_window: window,
        pair_guess: Some(best),
        coin: false,
    };
    if situation == Situation::MID {
        let bit = eve_bit_from_pair(best, table, stream)?;
        report.bit_guess = Some(bit.0);
        report.coin = bit.1 || !use_diff;
        if report.coin {
            report.confidence = 0.5;
        }
    }
    Ok(report)
}

/// Eve's bit for an identified `(alice_index, bob_index)` pair and whether
/// it had to be a coin flip.
pub fn eve_bit_from_pair(pair: (usize, usize), table: Option<&TruthTable>, stream: &RngStream) -> Result<(bool, bool)> {
    match table {
        Some(t) => match t.bit_of(pair.0, pair.1)? {
            Some(b) => Ok((b, false)),
            None => Ok((coin(stream), true)),
        },
        None => Ok((coin(stream), true)),
    }
}

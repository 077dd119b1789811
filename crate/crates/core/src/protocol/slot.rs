//! One clock period of the exchange.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::intelligent::{
    decide_slot_intelligent, enumerate_hypotheses, hypothesis_test, reduce_channel_noise, HypothesisEvaluation,
    IntelligentDecision,
};
use super::transient::{run_transient_walk, TransientOutcome};
use super::ProtocolConfig;
use crate::circuit::{EndpointSample, Line, LoopSample};
use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoiseSeries, RngStream};
use crate::stats::{mean_square, PairLevels, Situation, SituationClass};
use crate::truthtable::TruthTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// Both ends hold the same resistor.
    Insecure,
    Inconclusive,
    /// The party's evidence contradicts its own resistor choice.
    Inconsistent,
    /// A transient walk missed its target in time.
    Cancelled,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::Insecure => "insecure",
            DiscardReason::Inconclusive => "inconclusive",
            DiscardReason::Inconsistent => "inconsistent",
            DiscardReason::Cancelled => "cancelled",
        }
    }
}

/// Line observables, one entry per sample.
///
/// Positive `i_ch` flows from Bob's end toward Alice's. On an ideal wire the
/// two end voltages are identical.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTrace {
    pub u_end_a: Vec<f64>,
    pub u_end_b: Vec<f64>,
    pub i_ch: Vec<f64>,
    pub r_w: f64,
}

impl ChannelTrace {
    pub fn solve(u_a: &[f64], u_b: &[f64], line: &Line, r_w: f64) -> Result<Self> {
        if u_a.len() != u_b.len() {
            return Err(Error::contract("generator series differ in length"));
        }
        let n = u_a.len();
        let mut t = ChannelTrace {
            u_end_a: Vec::with_capacity(n),
            u_end_b: Vec::with_capacity(n),
            i_ch: Vec::with_capacity(n),
            r_w,
        };
        for (&a, &b) in u_a.iter().zip(u_b) {
            let s = line.solve(a, b);
            t.u_end_a.push(s.u_end_a);
            t.u_end_b.push(s.u_end_b);
            t.i_ch.push(s.i_ch);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.i_ch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_ch.is_empty()
    }

    pub fn is_ideal(&self) -> bool {
        self.r_w == 0.0
    }

    pub fn endpoint(&self, k: usize) -> EndpointSample {
        EndpointSample {
            u_end_a: self.u_end_a[k],
            u_end_b: self.u_end_b[k],
            i_ch: self.i_ch[k],
        }
    }

    /// Ideal-loop samples; `None` when the wire has resistance.
    pub fn loop_samples(&self, u_a: &[f64], u_b: &[f64]) -> Option<Vec<LoopSample>> {
        if !self.is_ideal() {
            return None;
        }
        Some(
            (0..self.len())
                .map(|k| LoopSample {
                    u_a: u_a[k],
                    u_b: u_b[k],
                    u_ch: self.u_end_a[k],
                    i_ch: self.i_ch[k],
                })
                .collect(),
        )
    }

    /// What `party` measures at its own terminal.
    pub fn view(&self, party: Party) -> PartyView<'_> {
        match party {
            Party::Alice => PartyView {
                voltage: &self.u_end_a,
                current: &self.i_ch,
                current_sign: -1.0,
            },
            Party::Bob => PartyView {
                voltage: &self.u_end_b,
                current: &self.i_ch,
                current_sign: 1.0,
            },
        }
    }
}

/// A party's terminal voltage and the line current.
///
/// `current_sign·current` is the current leaving the party's terminal
/// toward the far end.
#[derive(Debug, Clone, Copy)]
pub struct PartyView<'a> {
    pub voltage: &'a [f64],
    pub current: &'a [f64],
    pub current_sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub u_a_series: NoiseSeries,
    pub u_b_series: NoiseSeries,
    pub channel: ChannelTrace,
    pub r_a_index: usize,
    pub r_b_index: usize,
    pub walk: Option<TransientOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyOutcome {
    pub party: Party,
    pub own_index: usize,
    /// Level classification over the whole bank; absent on cancelled slots.
    pub situation: Option<SituationClass>,
    pub inferred_other: Option<usize>,
    pub bit: Option<bool>,
    pub discard: Option<DiscardReason>,
    pub margin: f64,
    /// Far-end resistance confirmed by the hypothesis test.
    pub hypothesis_accepted: Option<f64>,
}

impl PartyOutcome {
    fn discarded(party: Party, own_index: usize, situation: Option<SituationClass>, reason: DiscardReason) -> Self {
        PartyOutcome {
            party,
            own_index,
            situation,
            inferred_other: None,
            bit: None,
            discard: Some(reason),
            margin: situation.map_or(0.0, |s| s.margin),
            hypothesis_accepted: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub alice: PartyOutcome,
    pub bob: PartyOutcome,
    /// Both parties emitted a bit.
    pub secure: bool,
    pub bit_alice: Option<bool>,
    pub bit_bob: Option<bool>,
    pub discard: Option<DiscardReason>,
}

impl SlotOutcome {
    fn combine(alice: PartyOutcome, bob: PartyOutcome) -> Self {
        let secure = alice.bit.is_some() && bob.bit.is_some();
        let reasons = [alice.discard, bob.discard];
        let discard = if secure {
            None
        } else {
            [
                DiscardReason::Cancelled,
                DiscardReason::Insecure,
                DiscardReason::Inconsistent,
                DiscardReason::Inconclusive,
            ]
            .into_iter()
            .find(|r| reasons.contains(&Some(*r)))
        };
        SlotOutcome {
            alice,
            bob,
            secure,
            bit_alice: if secure { alice.bit } else { None },
            bit_bob: if secure { bob.bit } else { None },
            discard,
        }
    }

    /// Mean decision margin of the two parties.
    pub fn margin(&self) -> f64 {
        0.5 * (self.alice.margin + self.bob.margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub alice_index: usize,
    pub bob_index: usize,
    pub situation: Situation,
    pub secure: bool,
    /// Table value of `(alice_index, bob_index)` on secure slots.
    pub bit: Option<bool>,
}

/// Runs one slot with uniformly drawn resistor indices.
pub fn run_slot(
    config: &ProtocolConfig,
    slot_stream: &RngStream,
    table: &TruthTable,
) -> Result<(SlotTrace, SlotOutcome, GroundTruth)> {
    let n = config.bank.len();
    let mut rng = slot_stream.child("choice").rng();
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    run_slot_with_indices(config, slot_stream, table, a, b)
}

/// Runs one slot with the resistor indices fixed by the caller.
pub fn run_slot_with_indices(
    config: &ProtocolConfig,
    slot_stream: &RngStream,
    table: &TruthTable,
    alice_index: usize,
    bob_index: usize,
) -> Result<(SlotTrace, SlotOutcome, GroundTruth)> {
    config.validate()?;
    let n = config.bank.len();
    if table.n() != n {
        return Err(Error::contract(format!("table is for n = {}, bank has {n}", table.n())));
    }
    if alice_index >= n || bob_index >= n {
        return Err(Error::contract(format!(
            "resistor indices ({alice_index}, {bob_index}) outside bank of {n}"
        )));
    }
    let (mut a, mut b) = (alice_index, bob_index);
    let mut walk = None;
    if let Some(tcfg) = &config.transient {
        let targets = if tcfg.alternative {
            None
        } else {
            Some((config.bank.get(a), config.bank.get(b)))
        };
        let w = run_transient_walk(config, tcfg, targets, &slot_stream.child("transient"))?;
        if w.cancel {
            let empty = |r: f64| NoiseSeries {
                samples: Vec::new(),
                resistance: r,
                seed_id: String::new(),
            };
            let trace = SlotTrace {
                u_a_series: empty(config.bank.get(a)),
                u_b_series: empty(config.bank.get(b)),
                channel: ChannelTrace {
                    r_w: config.wire.resistance(),
                    ..ChannelTrace::default()
                },
                r_a_index: a,
                r_b_index: b,
                walk: Some(w),
            };
            let outcome = SlotOutcome::combine(
                PartyOutcome::discarded(Party::Alice, a, None, DiscardReason::Cancelled),
                PartyOutcome::discarded(Party::Bob, b, None, DiscardReason::Cancelled),
            );
            return Ok((trace, outcome, truth(table, a, b, n)?));
        }
        if tcfg.alternative {
            let (ra, rb) = w.final_resistances();
            a = nearest_index(config.bank.values(), ra);
            b = nearest_index(config.bank.values(), rb);
        }
        walk = Some(w);
    }

    let (r_a, r_b) = (config.bank.get(a), config.bank.get(b));
    let n_s = config.samples_per_slot;
    let u_a = sample_noise(r_a, &config.params, n_s, &slot_stream.child("alice"))?;
    let u_b = sample_noise(r_b, &config.params, n_s, &slot_stream.child("bob"))?;
    let r_w = config.wire.resistance();
    let line = Line::new(r_a, r_b, r_w)?;
    let channel = ChannelTrace::solve(&u_a.samples, &u_b.samples, &line, r_w)?;

    let levels = PairLevels::new(&config.bank, &config.params)?;
    let alice = decide_party(config, &levels, table, Party::Alice, a, &u_a.samples, channel.view(Party::Alice))?;
    let bob = decide_party(config, &levels, table, Party::Bob, b, &u_b.samples, channel.view(Party::Bob))?;
    let trace = SlotTrace {
        u_a_series: u_a,
        u_b_series: u_b,
        channel,
        r_a_index: a,
        r_b_index: b,
        walk,
    };
    Ok((trace, SlotOutcome::combine(alice, bob), truth(table, a, b, n)?))
}

fn nearest_index(values: &[f64], r: f64) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if (v - r).abs() < (values[best] - r).abs() {
            best = k;
        }
    }
    best
}

fn truth(table: &TruthTable, a: usize, b: usize, n: usize) -> Result<GroundTruth> {
    Ok(GroundTruth {
        alice_index: a,
        bob_index: b,
        situation: Situation::of_pair(a, b, n),
        secure: a != b,
        bit: table.bit_of(a, b)?,
    })
}

fn decide_party(
    config: &ProtocolConfig,
    levels: &PairLevels,
    table: &TruthTable,
    party: Party,
    own: usize,
    own_series: &[f64],
    view: PartyView<'_>,
) -> Result<PartyOutcome> {
    let n = config.bank.len();
    let policy = &config.policy;
    let ms_u = mean_square(view.voltage)?;
    let ms_i = mean_square(view.current)?;
    let pair = levels.classify(ms_u, ms_i);
    let situation = Some(SituationClass {
        label: pair.situation(n),
        margin: pair.margin,
    });

    let emit = |other: usize, margin: f64, hyp: Option<f64>| -> Result<PartyOutcome> {
        let mut out = PartyOutcome {
            party,
            own_index: own,
            situation,
            inferred_other: Some(other),
            bit: None,
            discard: None,
            margin,
            hypothesis_accepted: hyp,
        };
        if other == own {
            out.discard = Some(DiscardReason::Insecure);
        } else {
            let (i, j) = match party {
                Party::Alice => (own, other),
                Party::Bob => (other, own),
            };
            out.bit = table.bit_of(i, j)?;
        }
        Ok(out)
    };

    if config.variant.is_intelligent() {
        let own_r = config.bank.get(own);
        let mut evals = Vec::with_capacity(n);
        for h in enumerate_hypotheses(own, &config.bank, config.variant)? {
            let reduced = reduce_channel_noise(&view, own_series, own_r, h)?;
            let test = hypothesis_test(own_series, &reduced, policy.corr_sigmas)?;
            evals.push(HypothesisEvaluation::new(h, own_r, config.params.unit_power(), &reduced, test));
        }
        match decide_slot_intelligent(&evals, policy) {
            IntelligentDecision::Accept { index, resistance, margin } => {
                return emit(index, margin, Some(resistance));
            }
            IntelligentDecision::Discard(reason) => {
                return Ok(PartyOutcome::discarded(party, own, situation, reason));
            }
            IntelligentDecision::Degenerate => {}
        }
    }

    if !(pair.margin >= policy.inconclusive_margin) {
        return Ok(PartyOutcome::discarded(party, own, situation, DiscardReason::Inconclusive));
    }
    match pair.partner(own) {
        None => Ok(PartyOutcome::discarded(party, own, situation, DiscardReason::Inconsistent)),
        Some(other) => emit(other, pair.margin, None),
    }
}

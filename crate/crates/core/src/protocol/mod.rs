//! Slot- and key-level state machines for the KLJN family.
//!
//! Every variant shares one slot engine: both parties draw a resistor index
//! uniformly from the bank, feed seeded Johnson-like noise into the loop, and
//! infer the far-end resistor from what they observe at their own terminal.
//! Variants differ only in how that inference is made (level classification
//! or the intelligent hypothesis test), how big the bank is, and where the
//! truth table comes from (public or keyed by a prior key).

mod exchange;
mod intelligent;
mod slot;
mod transient;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseParams;
use crate::truthtable::{build_public_table, derive_keyed_schedule, parse_bits, KeyedSchedule, ResistorBank, TruthTable};

pub use exchange::{run_key_exchange, run_key_exchange_observed, KeyExchange, SlotRecord};
pub use intelligent::{
    decide_slot_intelligent, enumerate_hypotheses, hypothesis_nll, hypothesis_test, reduce_channel_noise, Hypothesis,
    HypothesisEvaluation, HypothesisResult, IntelligentDecision, ReducedTrace,
};
pub use slot::{
    run_slot, run_slot_with_indices, ChannelTrace, DiscardReason, GroundTruth, Party, PartyOutcome, PartyView,
    SlotOutcome, SlotTrace,
};
pub use transient::{run_transient_walk, TransientConfig, TransientOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "KLJN")]
    Kljn,
    #[serde(rename = "iKLJN")]
    IKljn,
    #[serde(rename = "MKLJN")]
    Mkljn,
    #[serde(rename = "KKLJN")]
    Kkljn,
    #[serde(rename = "KMKLJN")]
    Kmkljn,
    #[serde(rename = "iMKLJN")]
    IMkljn,
    #[serde(rename = "iKKLJN")]
    IKkljn,
    #[serde(rename = "iKMKLJN")]
    IKmkljn,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Kljn,
        Variant::IKljn,
        Variant::Mkljn,
        Variant::Kkljn,
        Variant::Kmkljn,
        Variant::IMkljn,
        Variant::IKkljn,
        Variant::IKmkljn,
    ];

    pub fn is_intelligent(self) -> bool {
        matches!(self, Variant::IKljn | Variant::IMkljn | Variant::IKkljn | Variant::IKmkljn)
    }

    pub fn is_keyed(self) -> bool {
        matches!(self, Variant::Kkljn | Variant::Kmkljn | Variant::IKkljn | Variant::IKmkljn)
    }

    /// Uses a bank of more than two resistors.
    pub fn is_multiple(self) -> bool {
        matches!(self, Variant::Mkljn | Variant::Kmkljn | Variant::IMkljn | Variant::IKmkljn)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Kljn => "KLJN",
            Variant::IKljn => "iKLJN",
            Variant::Mkljn => "MKLJN",
            Variant::Kkljn => "KKLJN",
            Variant::Kmkljn => "KMKLJN",
            Variant::IMkljn => "iMKLJN",
            Variant::IKkljn => "iKKLJN",
            Variant::IKmkljn => "iKMKLJN",
        }
    }

    pub fn parse(name: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::configuration(format!("unknown variant {name:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TableSource {
    Public,
    /// Per-slot orientation derived from a key written as `0`/`1` characters.
    Keyed { prior_key: String },
}

impl TableSource {
    pub fn is_keyed(&self) -> bool {
        matches!(self, TableSource::Keyed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Wire {
    Ideal,
    /// Lumped series wire resistance [Ω].
    Series { r_w: f64 },
}

impl Wire {
    pub fn resistance(&self) -> f64 {
        match self {
            Wire::Ideal => 0.0,
            Wire::Series { r_w } => *r_w,
        }
    }
}

/// Thresholds of the honest parties' decision rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionPolicy {
    /// Level decisions with a smaller log-space margin are inconclusive.
    #[serde(default = "DecisionPolicy::default_inconclusive_margin")]
    pub inconclusive_margin: f64,
    /// Intelligent decisions with a smaller likelihood margin [nats] are
    /// inconclusive.
    #[serde(default = "DecisionPolicy::default_score_margin")]
    pub score_margin: f64,
    /// Correlations within `corr_sigmas/√N` of zero accept a hypothesis.
    #[serde(default = "DecisionPolicy::default_corr_sigmas")]
    pub corr_sigmas: f64,
}

impl DecisionPolicy {
    fn default_inconclusive_margin() -> f64 {
        0.1
    }

    fn default_score_margin() -> f64 {
        0.5
    }

    fn default_corr_sigmas() -> f64 {
        3.0
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.inconclusive_margin) && ok(self.score_margin) && ok(self.corr_sigmas) && self.corr_sigmas > 0.0) {
            return Err(Error::configuration("decision policy thresholds must be finite and non-negative"));
        }
        Ok(())
    }
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        DecisionPolicy {
            inconclusive_margin: Self::default_inconclusive_margin(),
            score_margin: Self::default_score_margin(),
            corr_sigmas: Self::default_corr_sigmas(),
        }
    }
}

fn default_max_slots() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub bank: ResistorBank,
    pub params: NoiseParams,
    pub samples_per_slot: usize,
    #[serde(default = "default_table_source")]
    pub table_source: TableSource,
    #[serde(default = "default_wire")]
    pub wire: Wire,
    #[serde(default)]
    pub policy: DecisionPolicy,
    /// Random-walk ramp run before every slot, when present.
    #[serde(default)]
    pub transient: Option<TransientConfig>,
    /// Slot budget of a key exchange; keyed schedules are derived this long.
    #[serde(default = "default_max_slots")]
    pub max_slots: usize,
}

fn default_table_source() -> TableSource {
    TableSource::Public
}

fn default_wire() -> Wire {
    Wire::Ideal
}

impl ProtocolConfig {
    /// Ideal-wire configuration with a public table.
    pub fn new(variant: Variant, bank: ResistorBank, params: NoiseParams, samples_per_slot: usize) -> Self {
        ProtocolConfig {
            variant,
            bank,
            params,
            samples_per_slot,
            table_source: TableSource::Public,
            wire: Wire::Ideal,
            policy: DecisionPolicy::default(),
            transient: None,
            max_slots: default_max_slots(),
        }
    }

    pub fn with_wire(mut self, wire: Wire) -> Self {
        self.wire = wire;
        self
    }

    pub fn with_table_source(mut self, source: TableSource) -> Self {
        self.table_source = source;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.policy.validate()?;
        let n = self.bank.len();
        if self.variant.is_multiple() && n <= 2 {
            return Err(Error::configuration(format!(
                "{} needs more than two resistors, bank has {n}",
                self.variant
            )));
        }
        if !self.variant.is_multiple() && n != 2 {
            return Err(Error::configuration(format!(
                "{} uses exactly two resistors, bank has {n}",
                self.variant
            )));
        }
        if self.variant.is_keyed() != self.table_source.is_keyed() {
            return Err(Error::configuration(format!(
                "{} requires a {} table source",
                self.variant,
                if self.variant.is_keyed() { "keyed" } else { "public" }
            )));
        }
        if let TableSource::Keyed { prior_key } = &self.table_source {
            if parse_bits(prior_key)?.is_empty() {
                return Err(Error::configuration("keyed table source needs a non-empty prior key"));
            }
        }
        if self.samples_per_slot < 2 {
            return Err(Error::configuration("samples_per_slot must be at least 2"));
        }
        let r_w = self.wire.resistance();
        if !(r_w.is_finite() && r_w >= 0.0) {
            return Err(Error::configuration(format!("wire resistance must be non-negative, got {r_w}")));
        }
        if self.max_slots == 0 {
            return Err(Error::configuration("max_slots must be at least 1"));
        }
        if let Some(t) = &self.transient {
            t.validate(&self.bank)?;
        }
        Ok(())
    }

    /// The truth-table source for a whole run.
    pub fn table_provider(&self) -> Result<TableProvider> {
        let n = self.bank.len();
        match &self.table_source {
            TableSource::Public => Ok(TableProvider::Public(build_public_table(n)?)),
            TableSource::Keyed { prior_key } => {
                let key = parse_bits(prior_key)?;
                Ok(TableProvider::Keyed(derive_keyed_schedule(&key, self.max_slots, n)?))
            }
        }
    }
}

/// Truth table lookup by slot index.
#[derive(Debug, Clone)]
pub enum TableProvider {
    Public(TruthTable),
    Keyed(KeyedSchedule),
}

impl TableProvider {
    pub fn table_for(&self, slot: usize) -> Result<TruthTable> {
        match self {
            TableProvider::Public(t) => Ok(*t),
            TableProvider::Keyed(s) => s.table_for(slot),
        }
    }
}

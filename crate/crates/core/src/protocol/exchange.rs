use serde::{Deserialize, Serialize};

use super::slot::{run_slot, GroundTruth, SlotOutcome, SlotTrace};
use super::{ProtocolConfig, Variant};
use crate::adversary::EveReport;
use crate::error::{Error, Result};
use crate::noise::RngStream;

/// One line of the slot log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub variant: Variant,
    pub truth: GroundTruth,
    pub outcome: SlotOutcome,
    pub eve: Option<EveReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyExchange {
    pub key_alice: Vec<bool>,
    pub key_bob: Vec<bool>,
    pub log: Vec<SlotRecord>,
}

impl KeyExchange {
    pub fn bit_errors(&self) -> usize {
        self.key_alice.iter().zip(&self.key_bob).filter(|(a, b)| a != b).count()
    }
}

/// Runs slots until both parties hold `n_bits` key bits.
///
/// Slot `s` uses the stream `slot/{s}` under the root seed and, for keyed
/// variants, the schedule entry `s`.
pub fn run_key_exchange(config: &ProtocolConfig, n_bits: usize, seed: u64) -> Result<KeyExchange> {
    run_key_exchange_observed(config, n_bits, seed, |_, _, _, _| Ok(None))
}

/// [`run_key_exchange`] with an eavesdropper called on every slot.
///
/// The observer receives the slot index, the slot's stream, the trace and
/// the ground truth; whatever it reports lands in the slot log.
pub fn run_key_exchange_observed<F>(config: &ProtocolConfig, n_bits: usize, seed: u64, mut observer: F) -> Result<KeyExchange>
where
    F: FnMut(usize, &RngStream, &SlotTrace, &GroundTruth) -> Result<Option<EveReport>>,
{
    if n_bits == 0 {
        return Err(Error::parameter("n_bits must be at least 1"));
    }
    config.validate()?;
    let tables = config.table_provider()?;
    let root = RngStream::root(seed);
    let mut out = KeyExchange {
        key_alice: Vec::with_capacity(n_bits),
        key_bob: Vec::with_capacity(n_bits),
        log: Vec::new(),
    };
    let mut slot = 0;
    while out.key_alice.len() < n_bits {
        if slot >= config.max_slots {
            return Err(Error::configuration(format!(
                "slot budget of {} exhausted with {} of {n_bits} bits",
                config.max_slots,
                out.key_alice.len()
            )));
        }
        let table = tables.table_for(slot)?;
        let stream = root.child(&format!("slot/{slot}"));
        let (trace, outcome, truth) = run_slot(config, &stream, &table)?;
        let eve = observer(slot, &stream, &trace, &truth)?.map(|mut r| {
            r.slot = slot;
            r
        });
        if let (Some(a), Some(b)) = (outcome.bit_alice, outcome.bit_bob) {
            out.key_alice.push(a);
            out.key_bob.push(b);
        }
        out.log.push(SlotRecord {
            slot,
            variant: config.variant,
            truth,
            outcome,
            eve,
        });
        slot += 1;
    }
    Ok(out)
}

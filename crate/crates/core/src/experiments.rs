//! Batch runs: parameter sweeps, variant comparisons and CSV output.
//!
//! Slot `s` of sweep point `p` draws from the stream `point/{p}/slot/{s}`
//! under the root seed, so adding points leaves existing ones untouched.
//! Variant comparisons and the sample-budget benchmark share `slot/{s}`
//! across the compared configurations instead.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::adversary::{eve_exact_pair_guess, eve_passive_ideal, eve_wire_resistance, EveReport};
use crate::error::{Error, Result};
use crate::noise::RngStream;
use crate::protocol::{
    run_slot, DiscardReason, GroundTruth, ProtocolConfig, SlotRecord, SlotTrace, TableSource,
    Variant, Wire,
};
use crate::stats::predict_levels;
use crate::truthtable::{build_public_table, derive_keyed_schedule, parse_bits, ResistorBank, TruthTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveModel {
    /// Wire-resistance model on two-resistor banks, pair identification otherwise.
    #[default]
    Auto,
    Passive,
    Wire,
    ExactPair,
    /// No eavesdropper.
    Off,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EveConfig {
    #[serde(default)]
    pub model: EveModel,
    /// Samples Eve examines from the start of each slot; the whole slot by default.
    #[serde(default)]
    pub window: Option<usize>,
    /// Eve's guess of the prior key on keyed variants. Without one she reads
    /// the public table.
    #[serde(default)]
    pub prior_key: Option<String>,
}

/// The truth tables Eve believes in.
enum EveTables {
    Fixed(TruthTable),
    Keyed(crate::truthtable::KeyedSchedule),
}

impl EveTables {
    fn new(config: &ProtocolConfig, eve: &EveConfig) -> Result<Self> {
        let n = config.bank.len();
        match (&config.table_source, &eve.prior_key) {
            (TableSource::Keyed { .. }, Some(key)) => {
                Ok(EveTables::Keyed(derive_keyed_schedule(&parse_bits(key)?, config.max_slots, n)?))
            }
            _ => Ok(EveTables::Fixed(build_public_table(n)?)),
        }
    }

    fn table_for(&self, slot: usize) -> Result<TruthTable> {
        match self {
            EveTables::Fixed(t) => Ok(*t),
            EveTables::Keyed(s) => s.table_for(slot),
        }
    }
}

/// The configured eavesdropper, bound to one protocol configuration.
pub struct Eavesdropper<'a> {
    config: &'a ProtocolConfig,
    eve: &'a EveConfig,
    tables: EveTables,
}

impl<'a> Eavesdropper<'a> {
    pub fn new(config: &'a ProtocolConfig, eve: &'a EveConfig) -> Result<Self> {
        Ok(Eavesdropper {
            config,
            eve,
            tables: EveTables::new(config, eve)?,
        })
    }

    /// Observes slot `slot`; `stream` is the slot's own stream.
    pub fn observe(&self, slot: usize, stream: &RngStream, trace: &SlotTrace) -> Result<Option<EveReport>> {
        let (config, eve) = (self.config, self.eve);
        let len = trace.channel.len();
        if len == 0 || eve.model == EveModel::Off {
            return Ok(None);
        }
        let window = eve.window.unwrap_or(len).clamp(1, len);
        let stream = stream.child("eve");
        let table = self.tables.table_for(slot)?;
        let model = match eve.model {
            EveModel::Auto if config.bank.len() == 2 => EveModel::Wire,
            EveModel::Auto => EveModel::ExactPair,
            m => m,
        };
        let mut report = match model {
            EveModel::Passive => {
                let levels = predict_levels(config.bank.min(), config.bank.max(), &config.params)?;
                eve_passive_ideal(&trace.channel, &levels, window, &stream)?
            }
            EveModel::Wire => {
                eve_wire_resistance(&trace.channel, &config.bank, &config.params, Some(&table), window, &stream)?
            }
            _ => eve_exact_pair_guess(&trace.channel, &config.bank, &config.params, Some(&table), window, &stream)?,
        };
        report.slot = slot;
        Ok(Some(report))
    }
}

fn run_slots(
    config: &ProtocolConfig,
    eve: &EveConfig,
    slots: usize,
    root: &RngStream,
) -> Result<Vec<SlotRecord>> {
    config.validate()?;
    let tables = config.table_provider()?;
    let eve = Eavesdropper::new(config, eve)?;
    if slots > config.max_slots {
        return Err(Error::configuration(format!(
            "{slots} slots exceed max_slots = {}",
            config.max_slots
        )));
    }
    (0..slots)
        .into_par_iter()
        .map(|s| {
            let stream = root.child(&format!("slot/{s}"));
            let table = tables.table_for(s)?;
            let (trace, outcome, truth) = run_slot(config, &stream, &table)?;
            let eve = eve.observe(s, &stream, &trace)?;
            Ok(SlotRecord {
                slot: s,
                variant: config.variant,
                truth,
                outcome,
                eve,
            })
        })
        .collect()
}

/// Half-width of the normal-approximation 95% interval on a rate.
pub fn binomial_ci_half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub point_id: usize,
    pub param_name: String,
    pub param_value: String,
    pub slots: usize,
    /// Fraction of key bits on which Alice and Bob disagree.
    pub ber: f64,
    pub secure_fraction: f64,
    pub discard_inconclusive: f64,
    pub discard_inconsistent: f64,
    pub discard_insecure: f64,
    pub discard_cancelled: f64,
    /// Eve's bit success over key bits she guessed.
    pub eve_bit_success: f64,
    pub eve_bit_ci: f64,
    pub eve_guesses: usize,
    pub eve_slot_acc: f64,
    /// Exact `(alice, bob)` identification rate on truly secure slots.
    pub eve_pair_acc: f64,
    pub mean_margin: f64,
    pub seed: u64,
}

pub const METRICS_COLUMNS: [&str; 13] = [
    "point_id",
    "param_name",
    "param_value",
    "slots",
    "ber",
    "secure_fraction",
    "discard_inconclusive",
    "discard_insecure",
    "eve_bit_success",
    "eve_bit_ci",
    "eve_slot_acc",
    "mean_margin",
    "seed",
];

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Aggregates a slot log into one metrics row.
pub fn summarize(records: &[SlotRecord], point_id: usize, param_name: &str, param_value: &str, seed: u64) -> MetricsRow {
    let slots = records.len();
    let (mut bits, mut errors) = (0, 0);
    let mut discards = [0usize; 4];
    let (mut guesses, mut hits) = (0, 0);
    let (mut eve_slots, mut eve_correct_situation) = (0, 0);
    let (mut pair_slots, mut pair_hits) = (0, 0);
    let (mut margin_sum, mut margin_count) = (0.0, 0);
    for r in records {
        let o = &r.outcome;
        if let (Some(a), Some(b)) = (o.bit_alice, o.bit_bob) {
            bits += 1;
            errors += (a != b) as usize;
        }
        match o.discard {
            Some(DiscardReason::Inconclusive) => discards[0] += 1,
            Some(DiscardReason::Inconsistent) => discards[1] += 1,
            Some(DiscardReason::Insecure) => discards[2] += 1,
            Some(DiscardReason::Cancelled) => discards[3] += 1,
            None => {}
        }
        if o.discard != Some(DiscardReason::Cancelled) && o.margin().is_finite() {
            margin_sum += o.margin();
            margin_count += 1;
        }
        if let Some(eve) = &r.eve {
            eve_slots += 1;
            eve_correct_situation += (eve.situation_guess == r.truth.situation) as usize;
            if r.truth.secure {
                pair_slots += 1;
                pair_hits += (eve.pair_guess == Some((r.truth.alice_index, r.truth.bob_index))) as usize;
            }
            if let (Some(key), Some(guess)) = (o.bit_alice, eve.bit_guess) {
                guesses += 1;
                hits += (key == guess) as usize;
            }
        }
    }
    let eve_bit_success = ratio(hits, guesses);
    MetricsRow {
        point_id,
        param_name: param_name.to_owned(),
        param_value: param_value.to_owned(),
        slots,
        ber: if bits == 0 { 0.0 } else { ratio(errors, bits) },
        secure_fraction: ratio(bits, slots),
        discard_inconclusive: ratio(discards[0], slots),
        discard_inconsistent: ratio(discards[1], slots),
        discard_insecure: ratio(discards[2], slots),
        discard_cancelled: ratio(discards[3], slots),
        eve_bit_success,
        eve_bit_ci: binomial_ci_half_width(eve_bit_success, guesses),
        eve_guesses: guesses,
        eve_slot_acc: ratio(eve_correct_situation, eve_slots),
        eve_pair_acc: ratio(pair_hits, pair_slots),
        mean_margin: if margin_count == 0 { f64::NAN } else { margin_sum / margin_count as f64 },
        seed,
    }
}

/// Writes metrics rows with the fixed column set.
///
/// `discard_inconclusive` counts every discard other than an insecure slot.
pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for r in rows {
        let undecided = r.discard_inconclusive + r.discard_inconsistent + r.discard_cancelled;
        w.write_record([
            r.point_id.to_string(),
            r.param_name.clone(),
            r.param_value.clone(),
            r.slots.to_string(),
            r.ber.to_string(),
            r.secure_fraction.to_string(),
            undecided.to_string(),
            r.discard_insecure.to_string(),
            r.eve_bit_success.to_string(),
            r.eve_bit_ci.to_string(),
            r.eve_slot_acc.to_string(),
            r.mean_margin.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SLOT_LOG_COLUMNS: [&str; 21] = [
    "point_id",
    "slot",
    "variant",
    "alice_index",
    "bob_index",
    "true_situation",
    "true_bit",
    "alice_inferred",
    "alice_bit",
    "alice_discard",
    "bob_inferred",
    "bob_bit",
    "bob_discard",
    "slot_discard",
    "key_bit",
    "margin",
    "eve_situation",
    "eve_bit",
    "eve_confidence",
    "eve_window",
    "eve_coin",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bit(v: Option<bool>) -> String {
    opt(v.map(u8::from))
}

/// Writes slot records, one row per slot; empty cells stand for "none".
pub fn write_slot_log_csv<W: Write>(logs: &[(usize, Vec<SlotRecord>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SLOT_LOG_COLUMNS)?;
    for (point, records) in logs {
        for r in records {
            let o = &r.outcome;
            let eve = r.eve.as_ref();
            w.write_record([
                point.to_string(),
                r.slot.to_string(),
                r.variant.to_string(),
                r.truth.alice_index.to_string(),
                r.truth.bob_index.to_string(),
                r.truth.situation.as_str().to_owned(),
                bit(r.truth.bit),
                opt(o.alice.inferred_other),
                bit(o.alice.bit),
                opt(o.alice.discard.map(DiscardReason::as_str)),
                opt(o.bob.inferred_other),
                bit(o.bob.bit),
                opt(o.bob.discard.map(DiscardReason::as_str)),
                opt(o.discard.map(DiscardReason::as_str)),
                bit(o.bit_alice),
                o.margin().to_string(),
                opt(eve.map(|e| e.situation_guess.as_str())),
                bit(eve.and_then(|e| e.bit_guess)),
                opt(eve.map(|e| e.confidence)),
                opt(eve.map(|e| e.observed_window)),
                bit(eve.map(|e| e.coin)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Name(String),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    SamplesPerSlot,
    WireResistance,
    BankSize,
    Variant,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "samples_per_slot" => Ok(SweepParam::SamplesPerSlot),
            "r_w" => Ok(SweepParam::WireResistance),
            "n" => Ok(SweepParam::BankSize),
            "variant" => Ok(SweepParam::Variant),
            other => Err(Error::configuration(format!(
                "unknown sweep parameter {other:?}; expected samples_per_slot, r_w, n or variant"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ProtocolConfig,
    pub param: String,
    pub values: Vec<SweepValue>,
    pub slots: usize,
    pub seed: u64,
    #[serde(default)]
    pub eve: EveConfig,
    /// Prior key for keyed variants swept onto a public-table base.
    #[serde(default)]
    pub prior_key: Option<String>,
}

fn whole(value: &SweepValue, what: &str, min: usize) -> Result<usize> {
    match value {
        SweepValue::Number(x) if x.fract() == 0.0 && *x >= min as f64 && *x <= u32::MAX as f64 => Ok(*x as usize),
        other => Err(Error::configuration(format!("{what} must be an integer ≥ {min}, got {other}"))),
    }
}

fn multiplicity_twin(v: Variant, multiple: bool) -> Variant {
    use Variant::*;
    let pairs = [(Kljn, Mkljn), (IKljn, IMkljn), (Kkljn, Kmkljn), (IKkljn, IKmkljn)];
    for (two, many) in pairs {
        if v == two || v == many {
            return if multiple { many } else { two };
        }
    }
    v
}

/// Re-targets a configuration at another variant.
///
/// Banks shrink to `{R_min, R_max}` or grow to four geometric steps when the
/// bank size required by the variant changes; keyed variants take the base
/// key or `prior_key`.
pub fn adapt_to_variant(base: &ProtocolConfig, variant: Variant, prior_key: Option<&str>) -> Result<ProtocolConfig> {
    let mut c = base.clone();
    c.variant = variant;
    let multiple = base.bank.len() > 2;
    if variant.is_multiple() != multiple {
        c.bank = if variant.is_multiple() {
            ResistorBank::geometric(base.bank.min(), base.bank.max(), 4)?
        } else {
            ResistorBank::new(vec![base.bank.min(), base.bank.max()])?
        };
    }
    c.table_source = match (variant.is_keyed(), &base.table_source, prior_key) {
        (false, _, _) => TableSource::Public,
        (true, TableSource::Keyed { prior_key }, _) => TableSource::Keyed { prior_key: prior_key.clone() },
        (true, TableSource::Public, Some(k)) => TableSource::Keyed { prior_key: k.to_owned() },
        (true, TableSource::Public, None) => {
            return Err(Error::configuration(format!("{variant} needs a prior key")));
        }
    };
    Ok(c)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<SweepParam> {
        let param = SweepParam::parse(&self.param)?;
        if self.values.is_empty() {
            return Err(Error::configuration("sweep needs at least one value"));
        }
        if self.slots == 0 {
            return Err(Error::configuration("sweep needs at least one slot per point"));
        }
        self.base.validate()?;
        for v in &self.values {
            self.point_config(param, v)?.validate()?;
        }
        Ok(param)
    }

    fn point_config(&self, param: SweepParam, value: &SweepValue) -> Result<ProtocolConfig> {
        let mut c = self.base.clone();
        match param {
            SweepParam::SamplesPerSlot => c.samples_per_slot = whole(value, "samples_per_slot", 2)?,
            SweepParam::WireResistance => match value {
                SweepValue::Number(r) if r.is_finite() && *r >= 0.0 => {
                    c.wire = if *r == 0.0 { Wire::Ideal } else { Wire::Series { r_w: *r } };
                }
                other => return Err(Error::configuration(format!("r_w must be a non-negative number, got {other}"))),
            },
            SweepParam::BankSize => {
                let n = whole(value, "n", 2)?;
                c.bank = ResistorBank::geometric(self.base.bank.min(), self.base.bank.max(), n)?;
                let variant = multiplicity_twin(c.variant, n > 2);
                c = adapt_to_variant(&c, variant, self.prior_key.as_deref())?;
            }
            SweepParam::Variant => {
                let variant = match value {
                    SweepValue::Name(name) => Variant::parse(name)?,
                    other => return Err(Error::configuration(format!("variant must be a name, got {other}"))),
                };
                c = adapt_to_variant(&self.base, variant, self.prior_key.as_deref())?;
            }
        }
        Ok(c)
    }
}

/// Metrics rows and, per point, the full slot log.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<MetricsRow>,
    pub logs: Vec<(usize, Vec<SlotRecord>)>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<MetricsRow>> {
    Ok(run_sweep_logged(spec)?.rows)
}

pub fn run_sweep_logged(spec: &SweepSpec) -> Result<SweepResult> {
    let param = spec.validate()?;
    let root = RngStream::root(spec.seed);
    let mut result = SweepResult { rows: Vec::new(), logs: Vec::new() };
    for (p, value) in spec.values.iter().enumerate() {
        let config = spec.point_config(param, value)?;
        let records = run_slots(&config, &spec.eve, spec.slots, &root.child(&format!("point/{p}")))?;
        result.rows.push(summarize(&records, p, &spec.param, &value.to_string(), spec.seed));
        result.logs.push((p, records));
    }
    Ok(result)
}

/// Runs each configuration on the same slot streams.
///
/// All configurations must share noise parameters and the bank range.
pub fn compare_variants(configs: &[ProtocolConfig], slots: usize, seed: u64, eve: &EveConfig) -> Result<Vec<MetricsRow>> {
    let Some(first) = configs.first() else {
        return Err(Error::configuration("nothing to compare"));
    };
    for c in configs {
        if c.params != first.params {
            return Err(Error::configuration("compared configurations use different noise parameters"));
        }
        if c.bank.min() != first.bank.min() || c.bank.max() != first.bank.max() {
            return Err(Error::configuration(format!(
                "bank [{}, {}] of {} is incompatible with [{}, {}]",
                c.bank.min(),
                c.bank.max(),
                c.variant,
                first.bank.min(),
                first.bank.max()
            )));
        }
    }
    let root = RngStream::root(seed);
    configs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let records = run_slots(c, eve, slots, &root)?;
            Ok(summarize(&records, k, "variant", c.variant.name(), seed))
        })
        .collect()
}

/// Per-party decision error rate over `slots` slots.
///
/// A party errs when it names the wrong far-end resistor or discards the
/// slot for any reason other than correctly spotting an insecure pair.
pub fn decision_error(config: &ProtocolConfig, slots: usize, seed: u64) -> Result<f64> {
    let eve = EveConfig {
        model: EveModel::Off,
        ..EveConfig::default()
    };
    let records = run_slots(config, &eve, slots, &RngStream::root(seed))?;
    let errors: usize = records
        .iter()
        .map(|r| {
            let t: &GroundTruth = &r.truth;
            [(r.outcome.alice, t.bob_index), (r.outcome.bob, t.alice_index)]
                .iter()
                .filter(|(p, other)| p.inferred_other != Some(*other))
                .count()
        })
        .sum();
    Ok(errors as f64 / (2 * slots) as f64)
}

/// Smallest `samples_per_slot` in `[lo, hi]` whose decision error is at most
/// `target`, found by bisection on the common-stream error curve.
pub fn required_samples(
    config: &ProtocolConfig,
    target: f64,
    lo: usize,
    hi: usize,
    slots: usize,
    seed: u64,
) -> Result<Option<usize>> {
    let lo = lo.max(2);
    if lo > hi {
        return Err(Error::configuration("empty sample range"));
    }
    let err_at = |n: usize| {
        let mut c = config.clone();
        c.samples_per_slot = n;
        decision_error(&c, slots, seed)
    };
    if err_at(hi)? > target {
        return Ok(None);
    }
    if err_at(lo)? <= target {
        return Ok(Some(lo));
    }
    let (mut bad, mut good) = (lo, hi);
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if err_at(mid)? <= target {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupBenchmark {
    /// `(level-only, intelligent)` required samples per replicate.
    pub replicates: Vec<(usize, usize)>,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// One-sided sign-test p-value for "intelligent needs fewer".
    pub p_value: f64,
}

impl SpeedupBenchmark {
    pub fn median(&self) -> (f64, f64) {
        let med = |mut v: Vec<usize>| {
            v.sort_unstable();
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m] as f64
            } else {
                0.5 * (v[m - 1] + v[m]) as f64
            }
        };
        (
            med(self.replicates.iter().map(|r| r.0).collect()),
            med(self.replicates.iter().map(|r| r.1).collect()),
        )
    }
}

/// P(X ≥ k) for X ~ Binomial(n, ½).
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    if trials == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, trials as u64).expect("valid binomial");
    1.0 - b.cdf(wins as u64 - 1)
}

/// Compares the sample budget a level-only variant and its intelligent
/// twin need to reach `target` decision error, replicate by replicate.
pub fn benchmark_speedup(
    base: &ProtocolConfig,
    target: f64,
    range: (usize, usize),
    slots: usize,
    replicates: usize,
    seed: u64,
) -> Result<SpeedupBenchmark> {
    if base.variant.is_intelligent() {
        return Err(Error::configuration("benchmark base must be a level-only variant"));
    }
    let twin = match base.variant {
        Variant::Kljn => Variant::IKljn,
        Variant::Mkljn => Variant::IMkljn,
        Variant::Kkljn => Variant::IKkljn,
        _ => Variant::IKmkljn,
    };
    let mut smart = base.clone();
    smart.variant = twin;
    let root = RngStream::root(seed);
    let mut reps = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let rep_seed: u64 = root.child(&format!("replicate/{r}")).rng().random();
        let missing = |n: Option<usize>| n.unwrap_or(range.1 + 1);
        let a = missing(required_samples(base, target, range.0, range.1, slots, rep_seed)?);
        let b = missing(required_samples(&smart, target, range.0, range.1, slots, rep_seed)?);
        reps.push((a, b));
    }
    let wins = reps.iter().filter(|(a, b)| b < a).count();
    let losses = reps.iter().filter(|(a, b)| b > a).count();
    Ok(SpeedupBenchmark {
        wins,
        ties: reps.len() - wins - losses,
        losses,
        p_value: sign_test_p(wins, wins + losses),
        replicates: reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseParams;

    fn base(variant: Variant, n_s: usize) -> ProtocolConfig {
        ProtocolConfig::new(variant, ResistorBank::new(vec![1.0, 4.0]).unwrap(), NoiseParams::normalized(), n_s)
    }

    fn spec(param: &str, values: Vec<SweepValue>) -> SweepSpec {
        SweepSpec {
            base: base(Variant::Kljn, 200),
            param: param.into(),
            values,
            slots: 50,
            seed: 3,
            eve: EveConfig::default(),
            prior_key: None,
        }
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let s = spec("temperature", vec![SweepValue::Number(1.0)]);
        assert!(matches!(run_sweep(&s), Err(Error::Configuration(_))));
        let s = spec("n", vec![]);
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn single_point_sweep_is_reproducible() {
        let s = spec("samples_per_slot", vec![SweepValue::Number(300.0)]);
        let render = |rows: &[MetricsRow]| {
            let mut buf = Vec::new();
            write_metrics_csv(rows, &mut buf).unwrap();
            buf
        };
        let a = run_sweep(&s).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(render(&a), render(&run_sweep(&s).unwrap()));
        let text = String::from_utf8(render(&a)).unwrap();
        assert!(text.starts_with(&METRICS_COLUMNS.join(",")));
    }

    #[test]
    fn adding_points_keeps_existing_rows() {
        let one = run_sweep(&spec("r_w", vec![SweepValue::Number(0.0)])).unwrap();
        let two = run_sweep(&spec("r_w", vec![SweepValue::Number(0.0), SweepValue::Number(0.1)])).unwrap();
        assert_eq!(one[0], two[0]);
    }

    #[test]
    fn bank_size_sweep_switches_variant_family() {
        let s = spec("n", vec![SweepValue::Number(2.0), SweepValue::Number(4.0)]);
        let param = s.validate().unwrap();
        let c4 = s.point_config(param, &SweepValue::Number(4.0)).unwrap();
        assert_eq!(c4.variant, Variant::Mkljn);
        assert_eq!(c4.bank.len(), 4);
        assert!(s.point_config(param, &SweepValue::Number(2.5)).is_err());
    }

    #[test]
    fn variant_sweep_needs_a_key_for_keyed_variants() {
        let mut s = spec("variant", vec![SweepValue::Name("KKLJN".into())]);
        assert!(s.validate().is_err());
        s.prior_key = Some("0110".into());
        s.validate().unwrap();
        let s = spec("variant", vec![SweepValue::Name("XKLJN".into())]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn compare_rejects_foreign_banks() {
        let a = base(Variant::Kljn, 100);
        let mut b = base(Variant::Kljn, 100);
        b.bank = ResistorBank::new(vec![1.0, 8.0]).unwrap();
        assert!(matches!(
            compare_variants(&[a, b], 10, 1, &EveConfig::default()),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn ci_half_width() {
        assert!((binomial_ci_half_width(0.5, 100) - 0.098).abs() < 1e-12);
        assert!(binomial_ci_half_width(0.5, 0).is_nan());
    }

    #[test]
    fn ci_coverage_on_a_rigged_coin() {
        let mut rng = RngStream::root(11).rng();
        let (p_true, flips, trials) = (0.3, 400, 1000);
        let mut covered = 0;
        for _ in 0..trials {
            let k = (0..flips).filter(|_| rng.random::<f64>() < p_true).count();
            let p = k as f64 / flips as f64;
            covered += ((p - p_true).abs() <= binomial_ci_half_width(p, flips)) as usize;
        }
        assert!(covered as f64 / trials as f64 >= 0.93, "{covered}");
    }

    #[test]
    fn sign_test() {
        assert!((sign_test_p(10, 10) - 0.5f64.powi(10)).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 5), 1.0);
        assert!(sign_test_p(20, 30) < 0.05 && sign_test_p(19, 30) > 0.05);
    }

    #[test]
    fn decision_error_shrinks_with_samples() {
        let e_small = decision_error(&base(Variant::Kljn, 10), 300, 1).unwrap();
        let e_large = decision_error(&base(Variant::Kljn, 200), 300, 1).unwrap();
        assert!(e_large < e_small);
    }

    #[test]
    fn required_samples_brackets() {
        let c = base(Variant::Kljn, 10);
        let n = required_samples(&c, 0.05, 2, 400, 300, 5).unwrap().unwrap();
        let mut at = c.clone();
        at.samples_per_slot = n;
        assert!(decision_error(&at, 300, 5).unwrap() <= 0.05);
        at.samples_per_slot = n - 1;
        assert!(decision_error(&at, 300, 5).unwrap() > 0.05);
        assert_eq!(required_samples(&c, 0.0, 2, 3, 50, 5).unwrap(), None);
    }
}

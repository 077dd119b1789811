//! Random-walk ramp from the bank midpoint to each party's chosen resistor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolConfig;
use crate::error::{Error, Result};
use crate::noise::{sample_noise_profile, RngStream};
use crate::truthtable::ResistorBank;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientConfig {
    /// Walk duration [samples].
    pub t_r: usize,
    /// `δR` per step [Ω].
    pub step_size: f64,
    #[serde(default = "TransientConfig::default_step_interval")]
    pub step_interval: usize,
    /// Largest allowed `δR/R_min`.
    #[serde(default = "TransientConfig::default_adiabatic_threshold")]
    pub adiabatic_threshold: f64,
    /// Walk without targets and keep the endpoints when they end up apart.
    #[serde(default)]
    pub alternative: bool,
}

impl TransientConfig {
    fn default_step_interval() -> usize {
        1
    }

    fn default_adiabatic_threshold() -> f64 {
        0.1
    }

    pub fn new(t_r: usize, step_size: f64) -> Self {
        TransientConfig {
            t_r,
            step_size,
            step_interval: Self::default_step_interval(),
            adiabatic_threshold: Self::default_adiabatic_threshold(),
            alternative: false,
        }
    }

    pub fn validate(&self, bank: &ResistorBank) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::configuration(format!("step_size must be positive, got {}", self.step_size)));
        }
        if self.step_interval == 0 {
            return Err(Error::configuration("step_interval must be at least 1"));
        }
        if self.step_size > bank.max() - bank.min() {
            return Err(Error::configuration("step_size exceeds the bank range"));
        }
        if !(self.step_size / bank.min() <= self.adiabatic_threshold) {
            return Err(Error::configuration(format!(
                "step {} on R_min = {} breaks the adiabatic bound {}",
                self.step_size,
                bank.min(),
                self.adiabatic_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientOutcome {
    /// Resistance path, `t_r + 1` points starting at the midpoint.
    pub r_a: Vec<f64>,
    pub r_b: Vec<f64>,
    /// Generator voltages; sample `t` uses resistance `R(t)`.
    pub u_a: Vec<f64>,
    pub u_b: Vec<f64>,
    /// Targets reached in time. In alternative mode both flags report
    /// whether the endpoints were kept.
    pub reached: [bool; 2],
    pub cancel: bool,
}

impl TransientOutcome {
    pub fn final_resistances(&self) -> (f64, f64) {
        (*self.r_a.last().unwrap(), *self.r_b.last().unwrap())
    }
}

fn walk(start: f64, target: Option<f64>, t: &TransientConfig, lo: f64, hi: f64, stream: &RngStream) -> (Vec<f64>, bool) {
    let mut rng = stream.rng();
    let mut path = Vec::with_capacity(t.t_r + 1);
    let mut r = start;
    let mut reached = target == Some(start);
    path.push(r);
    for step in 1..=t.t_r {
        if !reached && step % t.step_interval == 0 {
            let mut next = if rng.random::<bool>() { r + t.step_size } else { r - t.step_size };
            if next > hi {
                next = r - t.step_size;
            } else if next < lo {
                next = r + t.step_size;
            }
            next = next.clamp(lo, hi);
            if let Some(goal) = target {
                if (r - goal) * (next - goal) <= 0.0 {
                    next = goal;
                    reached = true;
                }
            }
            r = next;
        }
        path.push(r);
    }
    (path, reached)
}

/// Walks both resistances from `(R_min + R_max)/2` toward their targets.
///
/// A walk stops on its target. Missing either target within `t_r` cancels
/// the slot. With `targets = None` the walks run the full duration and the
/// slot is kept when the endpoints differ by at least half the smallest bank
/// gap.
pub fn run_transient_walk(
    config: &ProtocolConfig,
    tcfg: &TransientConfig,
    targets: Option<(f64, f64)>,
    stream: &RngStream,
) -> Result<TransientOutcome> {
    let bank = &config.bank;
    tcfg.validate(bank)?;
    let (lo, hi) = (bank.min(), bank.max());
    if let Some((ta, tb)) = targets {
        for t in [ta, tb] {
            if !(t >= lo && t <= hi) {
                return Err(Error::parameter(format!("walk target {t} outside [{lo}, {hi}]")));
            }
        }
    }
    let start = (lo + hi) / 2.0;
    let (r_a, hit_a) = walk(start, targets.map(|t| t.0), tcfg, lo, hi, &stream.child("walk/alice"));
    let (r_b, hit_b) = walk(start, targets.map(|t| t.1), tcfg, lo, hi, &stream.child("walk/bob"));
    let u_a = sample_noise_profile(&r_a[..tcfg.t_r], &config.params, &stream.child("noise/alice"))?;
    let u_b = sample_noise_profile(&r_b[..tcfg.t_r], &config.params, &stream.child("noise/bob"))?;
    let (reached, cancel) = match targets {
        Some(_) => ([hit_a, hit_b], !(hit_a && hit_b)),
        None => {
            let keep = (r_a[tcfg.t_r] - r_b[tcfg.t_r]).abs() >= bank.smallest_gap() / 2.0;
            ([keep, keep], !keep)
        }
    };
    Ok(TransientOutcome { r_a, r_b, u_a, u_b, reached, cancel })
}

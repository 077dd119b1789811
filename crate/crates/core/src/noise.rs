//! Seeded Johnson-like noise generation.
//!
//! Band-limited white noise of bandwidth `Δf` is represented by independent
//! Gaussian samples taken at the Nyquist rate `2Δf`. Each sample of a
//! generator sitting on resistance `R` then carries the full mean-square
//! voltage `4·k·T_eff·R·Δf` given by the fluctuation-dissipation theorem.
//!
//! Randomness comes from [`RngStream`]s. A stream is a 256-bit key plus a
//! label path (`run/slot/party`); children are derived by hashing the
//! parent key with the child label, so any slot of any run can be
//! regenerated in isolation from the root seed and its path.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380649e-23;

fn default_boltzmann() -> f64 {
    BOLTZMANN
}

/// Publicly agreed noise parameters.
///
/// In normalized mode the unit of power is `4·k·T_eff·Δf`, so a generator on
/// resistance `R` has variance exactly `R` and the SI fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Effective temperature [K].
    pub t_eff: f64,
    /// Noise bandwidth Δf [Hz].
    pub bandwidth: f64,
    /// Boltzmann constant [J/K].
    #[serde(default = "default_boltzmann")]
    pub boltzmann: f64,
    #[serde(default)]
    pub normalized: bool,
}

impl NoiseParams {
    pub fn si(t_eff: f64, bandwidth: f64) -> Result<Self> {
        let params = NoiseParams {
            t_eff,
            bandwidth,
            boltzmann: BOLTZMANN,
            normalized: false,
        };
        params.validate()?;
        Ok(params)
    }

    /// Units where `4·k·T_eff·Δf = 1`.
    pub fn normalized() -> Self {
        NoiseParams {
            t_eff: 1.0,
            bandwidth: 1.0,
            boltzmann: 0.25,
            normalized: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.normalized {
            return Ok(());
        }
        for (name, value) in [
            ("t_eff", self.t_eff),
            ("bandwidth", self.bandwidth),
            ("boltzmann", self.boltzmann),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::parameter(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// `4·k·T_eff·Δf` in the active unit system [W].
    pub fn unit_power(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            4.0 * self.boltzmann * self.t_eff * self.bandwidth
        }
    }

    /// Mean-square generator voltage on `resistance` [V²].
    pub fn variance(&self, resistance: f64) -> f64 {
        self.unit_power() * resistance
    }

    /// Sample rate implied by the Nyquist representation [Hz].
    pub fn sample_rate(&self) -> f64 {
        2.0 * self.bandwidth
    }
}

/// One generator's voltage series over a clock period.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeries {
    pub samples: Vec<f64>,
    pub resistance: f64,
    /// Label path of the stream that produced the samples.
    pub seed_id: String,
}

/// A reproducible random stream identified by a label path.
#[derive(Clone)]
pub struct RngStream {
    key: [u8; 32],
    path: String,
    issued: HashSet<String>,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream").field("path", &self.path).finish()
    }
}

impl RngStream {
    pub fn root(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"kljn/root");
        hasher.update(seed.to_le_bytes());
        RngStream {
            key: hasher.finalize().into(),
            path: format!("seed={seed}"),
            issued: HashSet::new(),
        }
    }

    /// Derives a child stream, rejecting labels already issued by this parent.
    pub fn fork(&mut self, label: &str) -> Result<RngStream> {
        if !self.issued.insert(label.to_owned()) {
            return Err(Error::configuration(format!(
                "stream label {label:?} already forked from {}",
                self.path
            )));
        }
        Ok(self.child(label))
    }

    /// Derives a child stream without bookkeeping.
    ///
    /// Callers must guarantee label uniqueness structurally (slot indices,
    /// fixed party names); the same label always yields the same stream.
    pub fn child(&self, label: &str) -> RngStream {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        RngStream {
            key: hasher.finalize().into(),
            path: format!("{}/{label}", self.path),
            issued: HashSet::new(),
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key)
    }
}

/// Free-function form of [`RngStream::fork`].
pub fn fork_stream(parent: &mut RngStream, label: &str) -> Result<RngStream> {
    parent.fork(label)
}

fn check_resistance(resistance: f64) -> Result<()> {
    if resistance.is_finite() && resistance >= 0.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!(
            "resistance must be finite and non-negative, got {resistance}"
        )))
    }
}

/// Draws `n_samples` generator voltages for a source on `resistance`.
pub fn sample_noise(
    resistance: f64,
    params: &NoiseParams,
    n_samples: usize,
    stream: &RngStream,
) -> Result<NoiseSeries> {
    check_resistance(resistance)?;
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::parameter("n_samples must be at least 1"));
    }
    let sigma = params.variance(resistance).sqrt();
    let mut rng = stream.rng();
    let samples = (0..n_samples)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect();
    Ok(NoiseSeries {
        samples,
        resistance,
        seed_id: stream.path().to_owned(),
    })
}

/// Generator voltages for a source whose resistance changes sample by sample.
///
/// The generator spectrum follows the resistance so the noise temperature
/// stays at `T_eff`: sample `t` has variance `4·k·T_eff·R(t)·Δf`.
pub fn sample_noise_profile(
    resistances: &[f64],
    params: &NoiseParams,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = stream.rng();
    resistances
        .iter()
        .map(|&r| {
            check_resistance(r)?;
            let z: f64 = rng.sample(StandardNormal);
            Ok(params.variance(r).sqrt() * z)
        })
        .collect()
}

//! JSON run configuration shared by the `simulate` and `sweep` commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{EveConfig, SweepSpec, SweepValue};
use crate::protocol::ProtocolConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<SweepValue>,
    pub slots: usize,
    /// Prior key for keyed variants reached by a variant or `n` sweep.
    #[serde(default)]
    pub prior_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_metrics")]
    pub metrics: String,
    #[serde(default = "default_slot_log")]
    pub slot_log: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_metrics() -> String {
    "metrics.csv".into()
}

fn default_slot_log() -> String {
    "slots.csv".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            metrics: default_metrics(),
            slot_log: default_slot_log(),
        }
    }
}

fn default_bits() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub eve: EveConfig,
    #[serde(default = "default_bits")]
    pub n_bits: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::configuration(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Configuration(msg) => Error::configuration(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if self.n_bits == 0 {
            return Err(Error::configuration("n_bits must be at least 1"));
        }
        if let Some(spec) = self.sweep_spec() {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            base: self.protocol.clone(),
            param: s.param.clone(),
            values: s.values.clone(),
            slots: s.slots,
            seed: self.seed,
            eve: self.eve.clone(),
            prior_key: s.prior_key.clone(),
        })
    }
}

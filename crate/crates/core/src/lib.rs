//! Discrete-time Monte Carlo simulator of the Kirchhoff-law Johnson-noise
//! (KLJN) key exchange and its enhanced variants.

pub mod adversary;
pub mod circuit;
pub mod config;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod protocol;
pub mod stats;
pub mod truthtable;
pub mod verify;

pub use error::{Error, Result};

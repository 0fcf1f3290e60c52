//! Spiking actor networks with dendritic inter-layer connections and lateral
//! intra-layer connections, trained against artificial critics with TD3 or SAC.

pub mod diff;
pub mod encoding;
pub mod envs;
pub mod error;
pub mod harness;
pub mod rl;
pub mod rng;
pub mod snn;

pub use error::{Error, Result};

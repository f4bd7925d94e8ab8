//! Deterministic discrete-event simulator for cooperative-MIMO channel and
//! power scheduling in cluster-based hybrid wireless sensor networks.

pub mod capacity;
pub mod channel_mac;
pub mod config;
pub mod energy;
pub mod error;
pub mod negotiation;
pub mod power_game;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod topology;

pub use error::{Error, Result};

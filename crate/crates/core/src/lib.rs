//! Simulator and analysis toolkit for epidemic dissemination in which a mediator
//! monitors forwarding and punishes nodes that skip it.
//!
//! A stage is a fixed number of synchronous rounds. The first `2S + 2` rounds carry
//! accusations, monitoring requests and reports, and end with the mediator sending
//! verdicts, stage keys and forwarding seeds. The remaining rounds disseminate
//! events, each forwarded to a pseudorandom subset chosen by the node's seed and
//! encrypted under its key until the receiver has all keys.
//!
//! The crate-local `examples/` directory has one runnable program per capability.

pub mod analysis;
pub mod cli;
pub mod cipher;
pub mod config;
pub mod message;
pub mod protocol;
pub mod sim;
pub mod streams;
pub mod subset_prng;
pub mod utility;

pub use config::{EventId, NodeId, Rational, SimConfig};

//! Polar code construction as a sequential maze game.
//!
//! The crate is organised bottom-up:
//!
//! - [`polar`]: the Arıkan transform, encoding and [`CodeConstruction`].
//! - [`channel`]: BPSK over AWGN, channel LLRs and seeded per-frame RNG substreams.
//! - [`crc`]: bit-level CRC used by CRC-aided list decoding.
//! - [`decoder`]: SC and SCL decoders, the latter with a bit-by-bit stepping API.
//! - [`game`]: the construction maze whose rewards come from a stepped SCL-genie decoder.
//! - [`agent`]: tabular SARSA(λ) that learns to traverse the maze.
//! - [`baseline`]: Monte-Carlo reliability ranking, the reference construction.
//! - [`bench`]: frame-error-rate estimation and SNR sweeps with CSV output.

pub mod agent;
pub mod baseline;
pub mod bench;
pub mod channel;
pub mod crc;
pub mod decoder;
mod error;
pub mod game;
pub mod polar;

pub use error::{Error, Result};
pub use polar::CodeConstruction;

/// Largest supported log2 block length.
pub const MAX_LOG2_N: usize = 16;

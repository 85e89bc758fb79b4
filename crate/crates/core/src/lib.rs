//! Simulator for the noisy parallel broadcast model with erasure errors.
//!
//! `n` processors each hold one input symbol. In every synchronous round each
//! processor broadcasts one symbol to all others and every ordered reception
//! is independently replaced by an erasure mark with probability `p`.
//!
//! The crate provides:
//!
//! - [`channel`]: the seeded erasure channel, the repetition wrapper and
//!   transcript recording.
//! - [`codes`]: a concatenated binary erasure-aware code with relative
//!   distance at least 1/4, plus the random-matrix rank oracle.
//! - [`core_protocols`]: the constant-round AND and equality-test protocols.
//! - [`learn_input`]: the recursive protocol by which every processor learns
//!   the whole input in `O(log* n)` rounds.
//! - [`large_alphabet`]: the constant-round protocol over a prime field.
//! - [`symmetric`]: the constant-round Hamming-weight pipeline.
//! - [`harness`]: Monte Carlo experiment runner and report formats.

pub mod bits;
pub mod channel;
pub mod codes;
pub mod core_protocols;
pub mod error;
pub mod field;
pub mod harness;
pub mod large_alphabet;
pub mod learn_input;
pub mod rng;
pub mod stats;
pub mod symmetric;

pub use bits::BitString;
pub use channel::{
    required_gamma, Channel, ChannelConfig, ReceptionGrid, Relay, Symbol, Transcript,
};
pub use codes::{CodeSpec, ReceivedWord};
pub use error::{Error, Result};
pub use learn_input::{classify_outcome, Classification, LearnOutcome};
pub use rng::SimRng;

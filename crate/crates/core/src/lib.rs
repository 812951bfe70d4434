//! Rateless coding over arbitrarily varying channels (AVCs).
//!
//! The crate is organised bottom-up:
//!
//! - [`alphabet`]: distributions, channel matrices, empirical types and
//!   information quantities over finite alphabets.
//! - [`avc`]: the channel family `W(y|x,s)`, state costs and the two channel
//!   hulls (convex closure and row-convex closure).
//! - [`capacity`]: hull-minimised mutual information and the max-min
//!   capacities for input-blind and codeword-aware jammers.
//! - [`codebook`]: piecewise constant-composition random codebooks, message
//!   permutation, nesting by truncation.
//! - [`decoders`]: MMI decoding, chunkwise and concatenated list decoding and
//!   the two decision rules that pick the decoding time.
//! - [`derandomization`]: elimination feasibility and polynomial-evaluation
//!   message authentication over binary extension fields.
//! - [`adversary`]: jammer strategies and partial channel state information.
//! - [`harness`]: end-to-end rateless sessions, Monte Carlo error estimation,
//!   brute-force oracles and audits.
//!
//! All logarithms are base 2; rates are in bits per channel use.

pub mod adversary;
pub mod alphabet;
pub mod avc;
pub mod capacity;
pub mod codebook;
pub mod decoders;
pub mod derandomization;
pub mod harness;
pub mod seeds;

mod error;

pub use error::{Error, Result};

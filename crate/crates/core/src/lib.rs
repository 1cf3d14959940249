//! Link-level OFDM simulation and a fully convolutional neural SIMO
//! receiver, together with the transfer-learning machinery used to adapt a
//! trained receiver to a mismatched target configuration.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, experiment
//! orchestration and the command-line front end live in the `nrx` crate.
//!
//! Module map:
//!
//! * [`numerics`] - tensors, convolution, layer normalization, ReLU, Adam and
//!   finite-difference gradient checking.
//! * [`phy`] - Gray QAM mapping, LDPC coding and resource-grid bookkeeping.
//! * [`channel`] - tapped-delay-line fading, AWGN and Eb/No conversion.
//! * [`receiver`] - the convolutional receiver, its loss and training loop.
//! * [`transfer`] - checkpoints, architecture surgery, freezing and the
//!   adaptation techniques.
//! * [`eval`] - Monte-Carlo block error rate evaluation and the genie
//!   reference receiver.
#![no_std]
#![deny(unsafe_code)]
// Negated float comparisons are how NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Training failures hand back the last good model by value.
#![allow(clippy::result_large_err, clippy::large_enum_variant)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
mod error;
pub mod eval;
pub mod link;
pub mod numerics;
pub mod phy;
pub mod receiver;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};

//! Blind equalizer bootstrapping over a linear dual-polarization fiber channel.
//!
//! The crate simulates probabilistically shaped 64-QAM transmitted over a
//! static channel with polarization rotation, first-order PMD and residual
//! chromatic dispersion, and compares how quickly (and how reliably) blind
//! 2x2 butterfly equalizers lock on:
//!
//! * the symbol-wise constant modulus algorithm (CMA) and its batch and
//!   sliding-window ("flex") gradient-descent variants, followed by
//!   Viterbi-Viterbi carrier phase estimation;
//! * the variational-autoencoder equalizer, which jointly learns the
//!   equalizer and a channel estimate by minimizing a negative ELBO with Adam.
//!
//! Every frame of equalized symbols is scored by its bitwise mutual
//! information (BMI). [`harness`] drives complete runs and parameter sweeps.

// polarization loops index several parallel arrays; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod butterfly;
pub mod channel;
pub mod cma;
pub mod constellation;
pub mod cpe;
mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod selftest;
pub mod vae;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// A pair of equally long streams, index 0 = H polarization, 1 = V.
pub type DualPol = [Vec<C64>; 2];

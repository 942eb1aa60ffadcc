//! Numerical core for segment-level latent representation learning on
//! LogMel speech features and utterance-level LSTM emotion classification.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: dense f64 matrices, a counter-based PRNG, Adam, the LogMel
//! front end, AE/VAE/CVAE models with hand-written backpropagation, a
//! two-layer LSTM classifier trained by BPTT, label mapping, fold
//! construction and the accuracy metrics. File formats, the synthetic corpus
//! and the experiment driver live in the `emovae` crate.
//!
//! All randomness flows through [`numeric::RngStream`], so a run is a pure
//! function of its inputs and seed on every platform.

#![no_std]

extern crate alloc;

pub mod classifier;
pub mod corpus;
pub mod dsp;
mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod numeric;

pub use error::{Error, Result};

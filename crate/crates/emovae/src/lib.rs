//! File formats, synthetic corpus, experiment driver and reports for the
//! LogMel → AE/VAE/CVAE → LSTM speech emotion pipeline. The numerical
//! work lives in [`emovae_core`].

pub mod checkpoint;
pub mod config;
pub mod container;
mod error;
pub mod experiment;
pub mod features;
pub mod manifest;
pub mod reports;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};

/// Build identifier printed by `--version` and embedded in every report.
pub const BUILD_ID: &str = concat!("emovae ", env!("CARGO_PKG_VERSION"));

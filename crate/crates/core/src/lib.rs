//! Robust principal component analysis for packet-level network anomaly
//! detection.
//!
//! The pipeline: encode packet metadata into a column-per-packet feature
//! matrix ([`features`]), split that matrix into a low-rank nominal part plus
//! a sparse anomaly part ([`rpca`], built on the kernels in [`matfactor`]),
//! turn the nominal part into a scoring model ([`detector`]), and choose the
//! sparsity weight and detection threshold by cross-validated sweeps
//! ([`trainer`]). [`synth`] generates labeled traces for tests and
//! experiments.

pub mod detector;
pub mod error;
pub mod features;
pub mod fsutil;
pub mod matfactor;
pub mod rpca;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

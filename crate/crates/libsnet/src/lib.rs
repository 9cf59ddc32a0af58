//! Spectral 1D CNN toolkit for laser-induced breakdown spectroscopy (LIBS)
//! signals.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`spectra`]: spectrum/axis types, band masking, normalization
//! - [`simulator`]: synthetic shot generator (emission lines, continuum,
//!   dark level, instrument response, distance attenuation, white noise)
//! - [`nn`]: minimal differentiable layers (conv1d / batchnorm / ReLU /
//!   dense) with exact reverse-mode gradients
//! - [`models`]: the residual denoiser, the per-element calibration head,
//!   and the fused end-to-end network
//! - [`train`]: the three losses, Adam, and the training loops
//! - [`dataio`]: manifests, spectrum CSV files, dataset partitioning and
//!   model serialization
//! - [`eval`]: residual-error and per-element RMSE reports
//! - [`verify`]: finite-difference gradient verification suites
//!
//! Data-dependent failures are reported as [`Error`]; shape misuse inside
//! the numeric kernels panics.

pub mod dataio;
pub mod error;
pub mod inference;
pub mod eval;
pub mod models;
pub mod nn;
pub mod rng;
pub mod simulator;
pub mod spectra;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use spectra::{BandMask, Normalization, Spectrum, WavelengthAxis};

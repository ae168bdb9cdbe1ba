//! Open-system identification for a thermally driven mechanical oscillator.
//!
//! The crate is organised bottom-up:
//!
//! * [`bath`]: spectral densities `I(ω)`, their kernels, transforms and the
//!   oscillator Green's function.
//! * [`qbm`]: weak-coupling master-equation coefficients, covariance
//!   propagation and the non-Markovianity measure ξ.
//! * [`optomech`]: cavity steady state, noise spectra and the homodyne
//!   output spectrum.
//! * [`synth`]: seeded synthetic time series and averaged spectra.
//! * [`estimate`]: periodograms, averaging and the exponent fit.
//! * [`io`], [`config`], [`cli`]: file formats and the command-line driver.
//!
//! Natural units (`ħ = k_B = 1`, frequencies in units of the bare
//! mechanical frequency) are used throughout the physics modules; see
//! [`units`] for the SI boundary.

pub mod bath;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod estimate;
pub mod optomech;
pub mod qbm;
pub mod quad;
pub mod spectrum;
pub mod synth;
pub mod units;

pub use error::{Error, Result};

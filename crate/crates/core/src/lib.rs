//! Simulation and estimation toolkit for interferometric extinction
//! spectroscopy of a two-level emitter coupled to a plasmonic nanoantenna.
//!
//! The crate has three layers:
//!
//! * forward models — focused-beam phase factors ([`beam`]), coupled-oscillator
//!   transmission spectra ([`lineshape`]) and driven two-level dynamics
//!   ([`bloch`]);
//! * synthetic data generation — repeated frequency scans with drift and shot
//!   noise ([`scan`]) and pixel-integrated camera frames ([`image`]);
//! * estimators — a Levenberg–Marquardt core with model-specific front ends
//!   ([`fit`]), scan alignment, and centroid localization.
//!
//! All spectroscopic interfaces speak Hz (optical frequency) and nm (length);
//! angular quantities are confined to module internals. Every stochastic
//! routine takes an explicit seed and is deterministic for a given seed,
//! independent of thread count.

pub mod beam;
pub mod bloch;
pub mod error;
pub mod fit;
pub mod image;
pub mod lineshape;
pub mod par;
pub mod rng;
pub mod scan;
pub mod spectrum;
pub mod transparency;
pub mod units;

pub use error::{Error, Result};

//! Simulation of phase-encoded quantum communication links.
//!
//! The crate models three ways of carrying a path-encoded photon between two
//! parties: a long Mach-Zehnder interferometer, the time-bin scheme with two
//! unbalanced interferometers, and a few-mode-fiber link where photonic
//! lanterns map paths onto LP modes of a single core. On top of the linear
//! optics it provides BB84 probability matrices, QBER/loss analysis, and a
//! spectral toolkit for interferometer phase-drift traces.
//!
//! Module map:
//!
//! * [`modes`] - mode-amplitude states, transfer matrices, LP11 intensity rendering
//! * [`components`] - lanterns, fiber spans, weak coherent source, gated detectors
//! * [`protocol`] - state preparation, link architectures, QBER, key fraction
//! * [`experiments`] - parameter fits and scenario runners
//! * [`drift`] - drift trace synthesis and Fourier comparison
//! * [`config`] - key-value configuration files

pub mod components;
pub mod config;
pub mod drift;
mod error;
pub mod experiments;
pub mod modes;
pub mod protocol;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;

//! Rotational dynamics of a levitated, non-spinning hard ferromagnet and the
//! correlation-based measurement chain that extracts its Einstein–de Haas
//! frequency and gyromagnetic factor.
//!
//! Internally every quantity is SI and every frequency is angular (rad/s).
//! Hertz values only appear at the file and command-line boundary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constants;
pub mod dynamics;
pub mod magnet;
pub mod magnetostatics;
pub mod pipeline;
pub mod signal;
pub mod table;
pub mod uncertain;

pub mod seed;

pub use constants::PhysicalConstants;
pub use magnet::{DerivedProperties, IonComposition, IonSpecies, MagnetSpec, ParamError, TrapSpec};
pub use uncertain::Uncertain;

use std::f64::consts::PI;

/// Converts a frequency in Hz to an angular frequency in rad/s.
pub fn hz_to_angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Converts an angular frequency in rad/s to Hz.
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

//! Librational dynamics of the levitated magnet.
//!
//! Angle conventions: the dipole rests along x; `alpha` is the libration
//! about the vertical z axis and `beta` the libration about the horizontal
//! y axis. The restoring torques are `T_z = −I ω_α² α` and `T_y = +I ω_β² β`,
//! both derived from the potential `½ I (ω_α² n_y² + ω_β² n_z²)` of the
//! easy-axis unit vector `n`.

mod eigen;
mod linear;
mod params;
mod quasi;
mod rigid;

pub use eigen::{characteristic_residual, eigenmodes, EigenMode};
pub use linear::{linearized_integrate, linearized_rhs, mode_energies, LibrationRate, Trajectory};
pub use params::{LibrationParams, LibrationState, ModeKind};
pub use quasi::{quasi_mode, QuasiMode};
pub use rigid::{
    rigid_body_integrate, FreeRotor, HarmonicRestoringTorque, RigidBodyState, TorqueModel,
};

use thiserror::Error;

use crate::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid libration parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate inertia: 1 − ε_α ε_β = {0:e}")]
    DegenerateInertia(f64),
    #[error("mode frequencies are degenerate (ω_α = ω_β = {0})")]
    DegenerateModes(f64),
    #[error("time step {dt:e} s exceeds the limit {limit:e} s (1/(50 f_max))")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error("unequal anisotropy couplings with gyroscopic coupling have no real normal modes")]
    NonConservative,
    #[error("integration failed at t = {t:e} s: {reason}")]
    Integration { t: f64, reason: String },
}

/// Inertia of the rotor for the Einstein–de Haas frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inertia {
    Isotropic(f64),
    /// Principal moments about the two libration axes.
    Anisotropic { i_yy: f64, i_zz: f64 },
}

/// `ω_I = S / I`, or `S / sqrt(I_yy I_zz)` for an anisotropic rotor.
pub fn einstein_de_haas_frequency(spin: f64, inertia: Inertia) -> Result<f64, DynamicsError> {
    let effective = match inertia {
        Inertia::Isotropic(i) => {
            if !(i > 0.0) {
                return Err(DynamicsError::InvalidParams(format!("inertia must be positive, got {i}")));
            }
            i
        }
        Inertia::Anisotropic { i_yy, i_zz } => {
            if !(i_yy > 0.0 && i_zz > 0.0) {
                return Err(DynamicsError::InvalidParams(format!(
                    "inertia must be positive, got ({i_yy}, {i_zz})"
                )));
            }
            (i_yy * i_zz).sqrt()
        }
    };
    if !(spin > 0.0) {
        return Err(DynamicsError::InvalidParams(format!("spin must be positive, got {spin}")));
    }
    Ok(spin / effective)
}

/// Standard deviation of the thermal spin rate about the dipole axis,
/// `sqrt(k_B T / I)`.
pub fn thermal_gamma_dot_rms(temperature: f64, inertia: f64) -> f64 {
    (PhysicalConstants::K_B * temperature / inertia).sqrt()
}

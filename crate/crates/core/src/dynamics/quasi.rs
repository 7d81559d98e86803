use std::f64::consts::FRAC_PI_2;

use super::{DynamicsError, LibrationParams, LibrationState, ModeKind};

/// Perturbative elliptical mode, valid for `ω_I ≪ |ω_β² − ω_α²| / max(ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiMode {
    pub which: ModeKind,
    /// rad/s
    pub frequency: f64,
    pub primary_amplitude: f64,
    /// `ω_mode·(ω_I + γ̇)/(ω_β² − ω_α²)`.
    pub ellipticity_g: f64,
    /// The secondary axis leads by π/2.
    pub secondary_phase: f64,
}

impl QuasiMode {
    /// `(α, β)` at time `t`.
    pub fn angles_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.frequency * t).sin_cos();
        let primary = self.primary_amplitude * s;
        let secondary = self.ellipticity_g * self.primary_amplitude * c;
        match self.which {
            ModeKind::QuasiAlpha => (primary, secondary),
            ModeKind::QuasiBeta => (secondary, primary),
        }
    }

    pub fn state_at(&self, t: f64) -> LibrationState {
        let w = self.frequency;
        let (s, c) = (w * t).sin_cos();
        let a0 = self.primary_amplitude;
        let g = self.ellipticity_g;
        let (p, pd, q, qd) = (a0 * s, a0 * w * c, g * a0 * c, -g * a0 * w * s);
        let mut out = match self.which {
            ModeKind::QuasiAlpha => LibrationState::new(p, q, pd, qd),
            ModeKind::QuasiBeta => LibrationState::new(q, p, qd, pd),
        };
        out.t = t;
        out
    }
}

pub fn quasi_mode(
    params: &LibrationParams,
    which: ModeKind,
    amplitude: f64,
) -> Result<QuasiMode, DynamicsError> {
    params.validate()?;
    if !amplitude.is_finite() {
        return Err(DynamicsError::InvalidParams("amplitude must be finite".into()));
    }
    let split = params.omega_beta.powi(2) - params.omega_alpha.powi(2);
    let w = params.coupling();
    let fast = params.omega_alpha.max(params.omega_beta);
    if w.abs() * fast > 0.1 * split.abs() {
        log::warn!("gyroscopic coupling {w} rad/s is not small against the mode splitting; quasi-mode is inaccurate");
    }
    let frequency = params.omega(which);
    Ok(QuasiMode {
        which,
        frequency,
        primary_amplitude: amplitude,
        ellipticity_g: frequency * w / split,
        secondary_phase: FRAC_PI_2,
    })
}

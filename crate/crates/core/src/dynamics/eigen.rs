use num_complex::Complex64;

use super::{DynamicsError, LibrationParams, LibrationState, ModeKind};

/// Normal mode of the undamped linearized equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    pub kind: ModeKind,
    /// rad/s
    pub omega: f64,
    /// Complex secondary/primary amplitude ratio: β/α for quasi-α,
    /// α/β for quasi-β.
    pub ratio: Complex64,
}

impl EigenMode {
    /// |secondary| / |primary|.
    pub fn ellipticity(&self) -> f64 {
        self.ratio.norm()
    }

    /// Phase of the secondary axis relative to the primary, in (−π, π].
    pub fn phase(&self) -> f64 {
        self.ratio.arg()
    }

    /// State on this mode with primary angle `amplitude·sin(ωt + phase0)`.
    pub fn state_at(&self, amplitude: f64, phase0: f64, t: f64) -> LibrationState {
        let arg = self.omega * t + phase0;
        // Primary = Re(c e^{iωt}) with c = −i·amplitude·e^{iφ0}.
        let c = Complex64::new(0.0, -amplitude) * Complex64::from_polar(1.0, arg);
        let s = self.ratio * c;
        let iw = Complex64::new(0.0, self.omega);
        let (p, pd) = (c.re, (iw * c).re);
        let (q, qd) = (s.re, (iw * s).re);
        let mut out = match self.kind {
            ModeKind::QuasiAlpha => LibrationState::new(p, q, pd, qd),
            ModeKind::QuasiBeta => LibrationState::new(q, p, qd, pd),
        };
        out.t = t;
        out
    }
}

/// Complex determinant of the mode matrix at real frequency `omega`:
/// `(1 − ε_αε_β)ω⁴ − (ω_α² + ω_β² + w²)ω² + ω_α²ω_β² + i·w(ε_α − ε_β)ω³`,
/// with `w = ω_I + γ̇`. Damping is ignored.
pub fn characteristic_residual(params: &LibrationParams, omega: f64) -> Complex64 {
    let w = params.coupling();
    let (a2, b2) = (params.omega_alpha.powi(2), params.omega_beta.powi(2));
    let x = omega * omega;
    let re = (1.0 - params.eps_alpha * params.eps_beta) * x * x - (a2 + b2 + w * w) * x + a2 * b2;
    let im = w * (params.eps_alpha - params.eps_beta) * x * omega;
    Complex64::new(re, im)
}

/// The two positive normal-mode frequencies and their shapes, quasi-α first.
///
/// Unequal ε couplings combined with a nonzero gyroscopic term make the
/// mode matrix non-Hermitian; no real normal modes exist and
/// [`DynamicsError::NonConservative`] is returned.
pub fn eigenmodes(params: &LibrationParams) -> Result<[EigenMode; 2], DynamicsError> {
    params.validate()?;
    let w = params.coupling();
    if w != 0.0 && params.eps_alpha != params.eps_beta {
        return Err(DynamicsError::NonConservative);
    }
    let (a2, b2) = (params.omega_alpha.powi(2), params.omega_beta.powi(2));
    let qa = 1.0 - params.eps_alpha * params.eps_beta;
    if qa.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateInertia(qa));
    }
    let qb = a2 + b2 + w * w;
    let qc = a2 * b2;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    // Numerically stable pair of roots in x = ω².
    let big = (qb + disc) / (2.0 * qa);
    let small = qc / (qa * big);
    let (lo, hi) = (small.sqrt(), big.sqrt());
    let (omega_qa, omega_qb) = if params.omega_alpha < params.omega_beta { (lo, hi) } else { (hi, lo) };

    let i = Complex64::i();
    let ratio_alpha = {
        let x = omega_qa;
        (i * x * w - params.eps_beta * x * x) / (b2 - x * x)
    };
    let ratio_beta = {
        let x = omega_qb;
        (i * x * w + params.eps_alpha * x * x) / (x * x - a2)
    };
    Ok([
        EigenMode {
            kind: ModeKind::QuasiAlpha,
            omega: omega_qa,
            ratio: ratio_alpha,
        },
        EigenMode {
            kind: ModeKind::QuasiBeta,
            omega: omega_qb,
            ratio: ratio_beta,
        },
    ])
}

use super::DynamicsError;

/// Which quasi-mode is excited / dominant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    QuasiAlpha,
    QuasiBeta,
}

impl ModeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeKind::QuasiAlpha => "quasi-alpha",
            ModeKind::QuasiBeta => "quasi-beta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "quasi-alpha" | "alpha" => Some(ModeKind::QuasiAlpha),
            "quasi-beta" | "beta" => Some(ModeKind::QuasiBeta),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of the linearized two-angle libration model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibrationParams {
    pub omega_alpha: f64,
    pub omega_beta: f64,
    /// Einstein–de Haas angular frequency S/I.
    pub omega_i: f64,
    /// Classical spin rate about the dipole axis.
    pub gamma_dot: f64,
    pub eps_alpha: f64,
    pub eps_beta: f64,
    /// Amplitude damping rates (1/s); the equations carry `2·damping·θ̇`.
    pub damping_alpha: f64,
    pub damping_beta: f64,
    /// K; zero disables the Langevin torque.
    pub temperature: f64,
    /// kg·m²; only needed when `temperature > 0`.
    pub inertia: f64,
}

impl LibrationParams {
    pub fn new(omega_alpha: f64, omega_beta: f64, omega_i: f64) -> Result<Self, DynamicsError> {
        let p = Self {
            omega_alpha,
            omega_beta,
            omega_i,
            gamma_dot: 0.0,
            eps_alpha: 0.0,
            eps_beta: 0.0,
            damping_alpha: 0.0,
            damping_beta: 0.0,
            temperature: 0.0,
            inertia: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma_dot(mut self, gamma_dot: f64) -> Result<Self, DynamicsError> {
        self.gamma_dot = gamma_dot;
        self.validate().map(|_| self)
    }

    pub fn with_anisotropy(mut self, eps_alpha: f64, eps_beta: f64) -> Result<Self, DynamicsError> {
        self.eps_alpha = eps_alpha;
        self.eps_beta = eps_beta;
        self.validate().map(|_| self)
    }

    pub fn with_damping(mut self, alpha: f64, beta: f64) -> Result<Self, DynamicsError> {
        self.damping_alpha = alpha;
        self.damping_beta = beta;
        self.validate().map(|_| self)
    }

    /// Equal damping on both modes from an amplitude e-folding time.
    pub fn with_damping_time(self, tau: f64) -> Result<Self, DynamicsError> {
        if !(tau > 0.0) {
            return Err(DynamicsError::InvalidParams(format!("damping time must be positive, got {tau}")));
        }
        self.with_damping(1.0 / tau, 1.0 / tau)
    }

    pub fn with_thermal(mut self, temperature: f64, inertia: f64) -> Result<Self, DynamicsError> {
        self.temperature = temperature;
        self.inertia = inertia;
        self.validate().map(|_| self)
    }

    /// Gyroscopic coupling entering the equations, `ω_I + γ̇`.
    pub fn coupling(&self) -> f64 {
        self.omega_i + self.gamma_dot
    }

    pub fn omega(&self, mode: ModeKind) -> f64 {
        match mode {
            ModeKind::QuasiAlpha => self.omega_alpha,
            ModeKind::QuasiBeta => self.omega_beta,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::InvalidParams(m));
        let finite = [
            self.omega_alpha,
            self.omega_beta,
            self.omega_i,
            self.gamma_dot,
            self.eps_alpha,
            self.eps_beta,
            self.damping_alpha,
            self.damping_beta,
            self.temperature,
            self.inertia,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(self.omega_alpha > 0.0 && self.omega_beta > 0.0) {
            return bad(format!(
                "mode frequencies must be positive (ω_α = {}, ω_β = {})",
                self.omega_alpha, self.omega_beta
            ));
        }
        if self.omega_alpha == self.omega_beta {
            return Err(DynamicsError::DegenerateModes(self.omega_alpha));
        }
        if self.eps_alpha.abs() >= 1.0 || self.eps_beta.abs() >= 1.0 {
            return bad(format!(
                "anisotropy couplings must satisfy |ε| < 1 (ε_α = {}, ε_β = {})",
                self.eps_alpha, self.eps_beta
            ));
        }
        if self.damping_alpha < 0.0 || self.damping_beta < 0.0 {
            return bad("damping rates must be non-negative".into());
        }
        if self.temperature < 0.0 {
            return bad(format!("temperature must be non-negative, got {}", self.temperature));
        }
        if self.temperature > 0.0 && !(self.inertia > 0.0) {
            return bad("a positive inertia is required when temperature > 0".into());
        }
        Ok(())
    }
}

/// Libration angles and rates at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LibrationState {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub t: f64,
}

impl LibrationState {
    pub const SMALL_ANGLE_ADVISORY: f64 = 0.3;

    pub fn new(alpha: f64, beta: f64, alpha_dot: f64, beta_dot: f64) -> Self {
        Self {
            alpha,
            beta,
            alpha_dot,
            beta_dot,
            t: 0.0,
        }
    }

    pub fn exceeds_small_angle(&self) -> bool {
        self.alpha.abs() > Self::SMALL_ANGLE_ADVISORY || self.beta.abs() > Self::SMALL_ANGLE_ADVISORY
    }

    pub(crate) fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.alpha_dot, self.beta_dot]
    }

    pub(crate) fn from_array(x: [f64; 4], t: f64) -> Self {
        Self {
            alpha: x[0],
            beta: x[1],
            alpha_dot: x[2],
            beta_dot: x[3],
            t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(LibrationParams::new(1.0, 1.0, 0.1).is_err());
        assert!(LibrationParams::new(-1.0, 2.0, 0.1).is_err());
        let p = LibrationParams::new(1.0, 2.0, 0.1).unwrap();
        assert!(p.with_anisotropy(1.0, 0.0).is_err());
        assert!(p.with_damping(-0.1, 0.0).is_err());
        assert!(p.with_thermal(4.0, 0.0).is_err());
        assert!(p.with_thermal(-1.0, 1.0).is_err());
        assert!(p.with_thermal(4.0, 1e-19).is_ok());
        assert_eq!(p.with_gamma_dot(0.5).unwrap().coupling(), 0.6);
    }

    #[test]
    fn mode_kind_round_trip() {
        for k in [ModeKind::QuasiAlpha, ModeKind::QuasiBeta] {
            assert_eq!(ModeKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(ModeKind::parse("gamma"), None);
    }
}

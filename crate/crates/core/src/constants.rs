/// Physical constants (CODATA 2018) plus the standard gravity used for the
/// trap model. Exposed only as associated constants, so nothing can mutate them.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Vacuum permeability, T·m/A.
    pub const MU0: f64 = 1.256_637_062_12e-6;
    /// Bohr magneton, J/T.
    pub const MU_B: f64 = 9.274_010_078_3e-24;
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Local gravitational acceleration, m/s².
    pub const G0_DEFAULT: f64 = 9.8067;

    /// µ0 / 4π, the prefactor of every dipole energy.
    pub const fn mu0_over_4pi() -> f64 {
        Self::MU0 / (4.0 * std::f64::consts::PI)
    }
}

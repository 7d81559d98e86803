//! Image-method trap model for a dipole inside a spherical superconducting
//! cavity, forward prediction of the vertical and tilt mode frequencies, and
//! the inverse problem recovering radius and magnetization from them.
//!
//! The magnet centre sits a distance `r` from the cavity centre, directly
//! below it, so its height above the cavity bottom is `z = a − r`. With
//! `µ = M·V` the potential is
//!
//! ```text
//! U(r, β) = (µ0 µ² / 4π) · a⁵ / [(a² + r²)(a² − r²)³] · (1 + (a²/r²) sin²β) + m g0 (a − r)
//! ```

use thiserror::Error;

use crate::magnet::{MagnetSpec, ParamError, TrapSpec};
use crate::uncertain::{self, Uncertain, UncertainError};
use crate::{angular_to_hz, PhysicalConstants};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagnetostaticsError {
    #[error("position r = {r:e} m outside the cavity interior (0, {a:e})")]
    OutsideCavity { r: f64, a: f64 },
    #[error("no stable levitation: dU/dz has no sign change for z in [{z_lo:e}, {z_hi:e}] m")]
    NoLevitation { z_lo: f64, z_hi: f64 },
    #[error("equilibrium is unstable along {coordinate} (curvature {curvature:e})")]
    Unstable { coordinate: &'static str, curvature: f64 },
    #[error("beta correction requires f_beta > f_alpha >= 0 (f_beta = {f_beta}, f_alpha = {f_alpha})")]
    InvalidCorrection { f_beta: f64, f_alpha: f64 },
    #[error("inverse solve did not converge; final log-residual {residual:e}")]
    NoConvergence { residual: f64 },
    #[error("inverse solve found several roots: {candidates:?}")]
    MultipleRoots { candidates: Vec<(f64, f64)> },
    #[error("mode frequencies must be positive and finite")]
    InvalidFrequency,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Uncertainty(#[from] UncertainError),
}

type Result<T> = std::result::Result<T, MagnetostaticsError>;

/// Static equilibrium of the levitated dipole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    /// Distance of the magnet centre from the cavity centre, m.
    pub r0: f64,
    /// Height above the cavity bottom, `a − r0`, m.
    pub z0: f64,
    /// Tilt of the dipole out of the horizontal plane; always zero.
    pub beta0: f64,
}

/// Vertical translational and tilt librational angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFrequencies {
    pub omega_z: f64,
    pub omega_beta: f64,
}

impl ModeFrequencies {
    pub fn f_z_hz(&self) -> f64 {
        angular_to_hz(self.omega_z)
    }

    pub fn f_beta_hz(&self) -> f64 {
        angular_to_hz(self.omega_beta)
    }
}

/// How the second derivatives of `U` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureMethod {
    /// Closed-form derivatives of the cavity potential.
    #[default]
    Analytic,
    /// Central differences with one Richardson extrapolation
    /// (h_z = 1e-7 m, h_β = 1e-4 rad).
    Richardson,
}

pub const RICHARDSON_STEP_Z: f64 = 1e-7;
pub const RICHARDSON_STEP_BETA: f64 = 1e-4;

/// `a⁵ / [(a² + r²)(a² − r²)³]`
fn cavity_shape(a: f64, r: f64) -> f64 {
    let a2 = a * a;
    let r2 = r * r;
    a.powi(5) / ((a2 + r2) * (a2 - r2).powi(3))
}

/// First and second logarithmic derivatives of `cavity_shape` with respect to r.
fn cavity_shape_log_derivs(a: f64, r: f64) -> (f64, f64) {
    let p = a * a + r * r;
    let q = a * a - r * r;
    let r2 = r * r;
    let l1 = -2.0 * r / p + 6.0 * r / q;
    let l2 = -2.0 / p + 4.0 * r2 / (p * p) + 6.0 / q + 12.0 * r2 / (q * q);
    (l1, l2)
}

fn dipole_prefactor(magnet: &MagnetSpec) -> f64 {
    let mu = magnet.moment();
    PhysicalConstants::mu0_over_4pi() * mu * mu
}

/// Potential energy (J) of the magnet at distance `r` from the cavity centre
/// with tilt `beta`.
pub fn cavity_potential(trap: &TrapSpec, magnet: &MagnetSpec, r: f64, beta: f64) -> Result<f64> {
    let a = trap.cavity_radius();
    if !(r > 0.0 && r < a) {
        return Err(MagnetostaticsError::OutsideCavity { r, a });
    }
    let angular = 1.0 + (a * a) / (r * r) * beta.sin().powi(2);
    let magnetic = dipole_prefactor(magnet) * cavity_shape(a, r) * angular;
    Ok(magnetic + magnet.mass() * trap.gravity() * (a - r))
}

/// dU/dz at β = 0 with z = a − r.
fn vertical_force_balance(trap: &TrapSpec, magnet: &MagnetSpec, z: f64) -> f64 {
    let a = trap.cavity_radius();
    let r = a - z;
    let (l1, _) = cavity_shape_log_derivs(a, r);
    -dipole_prefactor(magnet) * cavity_shape(a, r) * l1 + magnet.mass() * trap.gravity()
}

/// Finds the levitation height by locating the unique sign change of dU/dz.
pub fn find_equilibrium(trap: &TrapSpec, magnet: &MagnetSpec) -> Result<EquilibriumPoint> {
    let a = trap.cavity_radius();
    let z_hi = a * (1.0 - 1e-9);
    let mut z_lo = a * 1e-3;
    if vertical_force_balance(trap, magnet, z_hi) <= 0.0 {
        return Err(MagnetostaticsError::NoLevitation { z_lo, z_hi });
    }
    while vertical_force_balance(trap, magnet, z_lo) >= 0.0 {
        z_lo *= 0.1;
        if z_lo < a * 1e-15 {
            return Err(MagnetostaticsError::NoLevitation { z_lo, z_hi });
        }
    }
    // dU/dz is increasing in z on the bracket; plain bisection to the last ulp.
    let (mut lo, mut hi) = (z_lo, z_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if vertical_force_balance(trap, magnet, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z0 = 0.5 * (lo + hi);
    let eq = EquilibriumPoint {
        r0: a - z0,
        z0,
        beta0: 0.0,
    };
    let c = curvatures(trap, magnet, &eq, CurvatureMethod::Analytic)?;
    check_stable(&c)?;
    Ok(eq)
}

/// Second derivatives of `U` at an equilibrium point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvatures {
    /// ∂²U/∂z², J/m²
    pub u_zz: f64,
    /// ∂²U/∂β², J/rad²
    pub u_beta_beta: f64,
}

fn check_stable(c: &Curvatures) -> Result<()> {
    if !(c.u_zz > 0.0) {
        return Err(MagnetostaticsError::Unstable {
            coordinate: "z",
            curvature: c.u_zz,
        });
    }
    if !(c.u_beta_beta > 0.0) {
        return Err(MagnetostaticsError::Unstable {
            coordinate: "beta",
            curvature: c.u_beta_beta,
        });
    }
    Ok(())
}

pub fn curvatures(
    trap: &TrapSpec,
    magnet: &MagnetSpec,
    eq: &EquilibriumPoint,
    method: CurvatureMethod,
) -> Result<Curvatures> {
    let a = trap.cavity_radius();
    let r = eq.r0;
    match method {
        CurvatureMethod::Analytic => {
            let c = dipole_prefactor(magnet);
            let f = cavity_shape(a, r);
            let (l1, l2) = cavity_shape_log_derivs(a, r);
            Ok(Curvatures {
                u_zz: c * f * (l1 * l1 + l2),
                u_beta_beta: c * f * 2.0 * a * a / (r * r),
            })
        }
        CurvatureMethod::Richardson => {
            let u = |z: f64, beta: f64| cavity_potential(trap, magnet, a - z, beta);
            let second = |h: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
                Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
            };
            let along_z = |dz: f64| u(eq.z0 + dz, 0.0);
            let along_beta = |db: f64| u(eq.z0, db);
            let hz = RICHARDSON_STEP_Z;
            let hb = RICHARDSON_STEP_BETA;
            let u_zz = (4.0 * second(hz / 2.0, &along_z)? - second(hz, &along_z)?) / 3.0;
            let u_bb = (4.0 * second(hb / 2.0, &along_beta)? - second(hb, &along_beta)?) / 3.0;
            Ok(Curvatures {
                u_zz,
                u_beta_beta: u_bb,
            })
        }
    }
}

/// Vertical and tilt mode frequencies at the stable equilibrium.
pub fn mode_frequencies(trap: &TrapSpec, magnet: &MagnetSpec) -> Result<ModeFrequencies> {
    mode_frequencies_with(trap, magnet, CurvatureMethod::Analytic)
}

pub fn mode_frequencies_with(
    trap: &TrapSpec,
    magnet: &MagnetSpec,
    method: CurvatureMethod,
) -> Result<ModeFrequencies> {
    let eq = find_equilibrium(trap, magnet)?;
    let c = curvatures(trap, magnet, &eq, method)?;
    check_stable(&c)?;
    Ok(ModeFrequencies {
        omega_z: (c.u_zz / magnet.mass()).sqrt(),
        omega_beta: (c.u_beta_beta / magnet.inertia()).sqrt(),
    })
}

/// Removes the residual-field contribution from a measured tilt-mode
/// frequency: `sqrt(f_β² − f_α²)`. Works in any consistent frequency unit.
pub fn beta_correction(f_beta: f64, f_alpha: f64) -> Result<f64> {
    if !(f_alpha >= 0.0 && f_beta > f_alpha && f_beta.is_finite()) {
        return Err(MagnetostaticsError::InvalidCorrection { f_beta, f_alpha });
    }
    Ok((f_beta * f_beta - f_alpha * f_alpha).sqrt())
}

/// Starting point for the inverse solve from the infinite-plane limit, where
/// `ω_z² = 4 g0 / z0`, `ω_β² = 5 g0 z0 / (3 R²)` and
/// `M² = 64π ρ g0 z0⁴ / (3 µ0 V)`.
pub fn plane_estimate(omega_z: f64, omega_beta: f64, density: f64, gravity: f64) -> (f64, f64) {
    let z0 = 4.0 * gravity / (omega_z * omega_z);
    let radius = (5.0 * gravity * z0 / (3.0 * omega_beta * omega_beta)).sqrt();
    let volume = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    let m2 = 64.0 * std::f64::consts::PI * density * gravity * z0.powi(4)
        / (3.0 * PhysicalConstants::MU0 * volume);
    (radius, m2.sqrt())
}

fn log_forward(trap: &TrapSpec, density: f64, x: [f64; 2]) -> Result<[f64; 2]> {
    let magnet = MagnetSpec::new(x[0].exp(), x[1].exp(), density)?;
    let f = mode_frequencies(trap, &magnet)?;
    Ok([f.omega_z.ln(), f.omega_beta.ln()])
}

/// Jacobian `∂(ln ω_z, ln ω_β)/∂(ln R, ln M)` of the forward model by
/// central differences in log space.
pub fn forward_log_jacobian(
    trap: &TrapSpec,
    radius: f64,
    magnetization: f64,
    density: f64,
) -> Result<[[f64; 2]; 2]> {
    let x = [radius.ln(), magnetization.ln()];
    let h = 1e-6;
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let fp = log_forward(trap, density, xp)?;
        let fm = log_forward(trap, density, xm)?;
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

const SOLVE_TOL: f64 = 1e-12;

fn newton_from(
    trap: &TrapSpec,
    density: f64,
    target: [f64; 2],
    start: (f64, f64),
) -> Result<(f64, f64)> {
    let mut x = [start.0.ln(), start.1.ln()];
    let residual = |x: [f64; 2]| -> Result<[f64; 2]> {
        let f = log_forward(trap, density, x)?;
        Ok([f[0] - target[0], f[1] - target[1]])
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut res = residual(x)?;
    for _ in 0..100 {
        if norm(res) < SOLVE_TOL {
            return Ok((x[0].exp(), x[1].exp()));
        }
        let j = forward_log_jacobian(trap, x[0].exp(), x[1].exp(), density)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let mut dx = [
            -(j[1][1] * res[0] - j[0][1] * res[1]) / det,
            -(-j[1][0] * res[0] + j[0][0] * res[1]) / det,
        ];
        let len = dx[0].abs().max(dx[1].abs());
        if len > 1.0 {
            dx = [dx[0] / len, dx[1] / len];
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Ok(r) = residual(trial) {
                if norm(r) < norm(res) || norm(r) < SOLVE_TOL {
                    x = trial;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm(res) < SOLVE_TOL {
        Ok((x[0].exp(), x[1].exp()))
    } else {
        Err(MagnetostaticsError::NoConvergence {
            residual: norm(res),
        })
    }
}

/// Damped Newton solve of `mode_frequencies(R, M) = (ω_z, ω_β)` in
/// `(ln R, ln M)`, started from the infinite-plane estimate.
pub fn solve_magnet(
    omega_z: f64,
    omega_beta: f64,
    trap: &TrapSpec,
    density: f64,
) -> Result<(f64, f64)> {
    if !(omega_z > 0.0 && omega_beta > 0.0 && omega_z.is_finite() && omega_beta.is_finite()) {
        return Err(MagnetostaticsError::InvalidFrequency);
    }
    let start = plane_estimate(omega_z, omega_beta, density, trap.gravity());
    newton_from(trap, density, [omega_z.ln(), omega_beta.ln()], start)
}

/// Measured vertical and (β-corrected) tilt-mode angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredModes {
    pub omega_z: Uncertain,
    pub omega_beta: Uncertain,
}

/// Known-within-uncertainty parameters of the inverse problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionPriors {
    pub cavity_radius: Uncertain,
    pub density: Uncertain,
    pub gravity: f64,
}

impl Default for InversionPriors {
    /// a = 2.5 mm ± 10 %, ρ = 7430 kg/m³ ± 5 %, g0 exact.
    fn default() -> Self {
        Self {
            cavity_radius: Uncertain::new(2.5e-3, 2.5e-4).unwrap(),
            density: Uncertain::new(7430.0, 371.5).unwrap(),
            gravity: PhysicalConstants::G0_DEFAULT,
        }
    }
}

/// Default relative reproducibility of measured mode frequencies.
pub const DEFAULT_FREQUENCY_REL_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            mc_samples: uncertain::DEFAULT_MC_SAMPLES,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetEstimate {
    /// m
    pub radius: Uncertain,
    /// A/m
    pub magnetization: Uncertain,
    /// Monte Carlo draws for which the solve failed.
    pub mc_failed: usize,
}

/// Infers `(R, M)` from measured mode frequencies. Central values come from
/// the nominal inputs; uncertainties are Monte Carlo sample standard
/// deviations over `(ω_z, ω_β, a, ρ)`.
pub fn infer_magnet(
    modes: MeasuredModes,
    priors: InversionPriors,
    opts: InversionOptions,
) -> Result<MagnetEstimate> {
    let trap = TrapSpec::new(priors.cavity_radius.value(), priors.gravity)?;
    let rho = priors.density.value();
    let (wz, wb) = (modes.omega_z.value(), modes.omega_beta.value());
    let central = solve_magnet(wz, wb, &trap, rho)?;

    // Look for other roots from starts scattered around the plane estimate.
    let start = plane_estimate(wz, wb, rho, priors.gravity);
    let mut roots = vec![central];
    for (fr, fm) in [(0.5, 0.5), (2.0, 2.0), (0.5, 2.0), (2.0, 0.5)] {
        if let Ok(r) = newton_from(&trap, rho, [wz.ln(), wb.ln()], (start.0 * fr, start.1 * fm)) {
            if roots
                .iter()
                .all(|q| ((r.0 - q.0) / q.0).abs() > 1e-6 || ((r.1 - q.1) / q.1).abs() > 1e-6)
            {
                roots.push(r);
            }
        }
    }
    if roots.len() > 1 {
        return Err(MagnetostaticsError::MultipleRoots { candidates: roots });
    }

    let inputs = [modes.omega_z, modes.omega_beta, priors.cavity_radius, priors.density];
    let (sigma_r, sigma_m, failed) = if inputs.iter().all(|u| u.sigma() == 0.0) {
        (0.0, 0.0, 0)
    } else {
        let g0 = priors.gravity;
        let mc = uncertain::monte_carlo(
            |x| {
                let trap = TrapSpec::new(x[2], g0).ok()?;
                let (r, m) = solve_magnet(x[0], x[1], &trap, x[3]).ok()?;
                Some(vec![r, m])
            },
            &inputs,
            opts.mc_samples,
            opts.seed,
        )?;
        (mc.sigmas[0], mc.sigmas[1], mc.n_failed)
    };
    Ok(MagnetEstimate {
        radius: Uncertain::new(central.0, sigma_r)?,
        magnetization: Uncertain::new(central.1, sigma_m)?,
        mc_failed: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn row2() -> MagnetSpec {
        MagnetSpec::new(23.6e-6, 675e3, 7430.0).unwrap()
    }

    /// Interaction energy of a tilted dipole with its image below an infinite
    /// superconducting plane, assembled from the vector dipole field:
    /// the image of m = (mx, 0, mz) at height z is (mx, 0, −mz) at −z, and
    /// the induced-image energy is −½ m·B_image.
    fn plane_image_energy(mu: f64, z: f64, beta: f64) -> f64 {
        let m = [mu * beta.cos(), 0.0, mu * beta.sin()];
        let m_img = [m[0], m[1], -m[2]];
        let d = 2.0 * z;
        let rhat = [0.0, 0.0, 1.0];
        let mdotr: f64 = m_img.iter().zip(rhat.iter()).map(|(a, b)| a * b).sum();
        let k = PhysicalConstants::MU0 / (4.0 * PI) / d.powi(3);
        let b: Vec<f64> = (0..3).map(|i| k * (3.0 * mdotr * rhat[i] - m_img[i])).collect();
        -0.5 * (0..3).map(|i| m[i] * b[i]).sum::<f64>()
    }

    fn plane_frequencies(magnet: &MagnetSpec, g0: f64) -> (f64, f64) {
        // Equilibrium and curvatures of U = C/(16 z³)(1 + sin²β) + m g0 z.
        let c = PhysicalConstants::mu0_over_4pi() * magnet.moment().powi(2);
        let z0 = (3.0 * c / (16.0 * magnet.mass() * g0)).powf(0.25);
        let u_zz = 12.0 * c / (16.0 * z0.powi(5));
        let u_bb = 2.0 * c / (16.0 * z0.powi(3));
        ((u_zz / magnet.mass()).sqrt(), (u_bb / magnet.inertia()).sqrt())
    }

    #[test]
    fn flat_tilt_has_unit_angular_factor() {
        let trap = TrapSpec::standard();
        let m = row2();
        let a = trap.cavity_radius();
        let r = a - 2.8e-4;
        let expect = PhysicalConstants::mu0_over_4pi() * m.moment().powi(2) * a.powi(5)
            / ((a * a + r * r) * (a * a - r * r).powi(3))
            + m.mass() * trap.gravity() * (a - r);
        assert_relative_eq!(cavity_potential(&trap, &m, r, 0.0).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn tilt_symmetry() {
        let trap = TrapSpec::standard();
        let m = row2();
        for (r, b) in [(1e-3, 0.3), (2.2e-3, -1.1), (5e-4, 2.0)] {
            let up = cavity_potential(&trap, &m, r, b).unwrap();
            let down = cavity_potential(&trap, &m, r, -b).unwrap();
            assert_eq!(up, down);
        }
    }

    #[test]
    fn outside_cavity_rejected() {
        let trap = TrapSpec::standard();
        let m = row2();
        assert!(cavity_potential(&trap, &m, 0.0, 0.1).is_err());
        assert!(cavity_potential(&trap, &m, 2.5e-3, 0.0).is_err());
        assert!(cavity_potential(&trap, &m, -1e-4, 0.0).is_err());
    }

    #[test]
    fn large_cavity_matches_plane_image() {
        let trap = TrapSpec::new(1.0, PhysicalConstants::G0_DEFAULT).unwrap();
        let m = row2();
        let z0 = 250e-6;
        for beta in [0.0, 0.2] {
            let total = cavity_potential(&trap, &m, 1.0 - z0, beta).unwrap();
            let magnetic = total - m.mass() * trap.gravity() * z0;
            let oracle = plane_image_energy(m.moment(), z0, beta);
            assert!(((magnetic - oracle) / oracle).abs() < 1e-3, "beta {beta}: {magnetic} vs {oracle}");
        }
    }

    #[test]
    fn equilibrium_matches_grid_scan() {
        let trap = TrapSpec::standard();
        let m = row2();
        let eq = find_equilibrium(&trap, &m).unwrap();
        let a = trap.cavity_radius();
        let n = 1_000_000;
        let (lo, hi) = (0.01 * a, 0.99 * a);
        let step = (hi - lo) / (n - 1) as f64;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let r = lo + step * i as f64;
            let u = cavity_potential(&trap, &m, r, 0.0).unwrap();
            if u < best.0 {
                best = (u, r);
            }
        }
        assert!((best.1 - eq.r0).abs() <= step, "grid {} vs {}", best.1, eq.r0);
        assert_eq!(eq.beta0, 0.0);
        assert_relative_eq!(eq.z0, a - eq.r0, max_relative = 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_equilibrium() {
        let trap = TrapSpec::standard();
        let m = row2();
        let eq = find_equilibrium(&trap, &m).unwrap();
        let h = 1e-9;
        let up = cavity_potential(&trap, &m, eq.r0 + h, 0.0).unwrap();
        let dn = cavity_potential(&trap, &m, eq.r0 - h, 0.0).unwrap();
        let grad = (up - dn) / (2.0 * h);
        // Compare against the gravitational force scale m·g0.
        assert!(grad.abs() < 1e-6 * m.mass() * trap.gravity(), "grad {grad}");
    }

    #[test]
    fn analytic_and_richardson_curvatures_agree() {
        let trap = TrapSpec::standard();
        for m in [row2(), MagnetSpec::new(31.2e-6, 591e3, 7430.0).unwrap()] {
            let a = mode_frequencies_with(&trap, &m, CurvatureMethod::Analytic).unwrap();
            let n = mode_frequencies_with(&trap, &m, CurvatureMethod::Richardson).unwrap();
            assert_relative_eq!(a.omega_z, n.omega_z, max_relative = 1e-6);
            assert_relative_eq!(a.omega_beta, n.omega_beta, max_relative = 1e-6);
        }
    }

    #[test]
    fn frequency_definition_identity() {
        let trap = TrapSpec::standard();
        let m = row2();
        let eq = find_equilibrium(&trap, &m).unwrap();
        let c = curvatures(&trap, &m, &eq, CurvatureMethod::Analytic).unwrap();
        let f = mode_frequencies(&trap, &m).unwrap();
        assert_relative_eq!(f.f_beta_hz().powi(2), c.u_beta_beta / m.inertia() / (2.0 * PI).powi(2), max_relative = 1e-14);
        assert_relative_eq!(f.f_z_hz().powi(2), c.u_zz / m.mass() / (2.0 * PI).powi(2), max_relative = 1e-14);
    }

    #[test]
    fn stronger_dipole_floats_higher_with_new_frequencies() {
        let trap = TrapSpec::standard();
        let base = row2();
        let doubled = MagnetSpec::new(23.6e-6, 2.0 * 675e3, 7430.0).unwrap();
        let e1 = find_equilibrium(&trap, &base).unwrap();
        let e2 = find_equilibrium(&trap, &doubled).unwrap();
        assert!(e2.z0 > e1.z0);
        let f1 = mode_frequencies(&trap, &base).unwrap();
        let f2 = mode_frequencies(&trap, &doubled).unwrap();
        assert!((f1.omega_z - f2.omega_z).abs() > 1e-3 * f1.omega_z);
        assert!((f1.omega_beta - f2.omega_beta).abs() > 1e-3 * f1.omega_beta);
    }

    #[test]
    fn height_increases_with_magnetization() {
        let trap = TrapSpec::standard();
        let mut last = 0.0;
        for k in 0..30 {
            let m = MagnetSpec::new(23.6e-6, 300e3 + 25e3 * k as f64, 7430.0).unwrap();
            let z0 = find_equilibrium(&trap, &m).unwrap().z0;
            assert!(z0 > last);
            last = z0;
        }
    }

    #[test]
    fn cavity_converges_to_plane_limit() {
        let m = row2();
        let g0 = PhysicalConstants::G0_DEFAULT;
        let (pz, pb) = plane_frequencies(&m, g0);
        let rel = |a: f64| {
            let f = mode_frequencies(&TrapSpec::new(a, g0).unwrap(), &m).unwrap();
            ((f.omega_z - pz) / pz).abs().max(((f.omega_beta - pb) / pb).abs())
        };
        let f05 = mode_frequencies(&TrapSpec::new(0.5, g0).unwrap(), &m).unwrap();
        let f1 = mode_frequencies(&TrapSpec::new(1.0, g0).unwrap(), &m).unwrap();
        assert!(((f05.omega_z - f1.omega_z) / f1.omega_z).abs() < 0.01);
        assert!(((f05.omega_beta - f1.omega_beta) / f1.omega_beta).abs() < 0.01);

        let mut last = f64::INFINITY;
        for a in [2.5e-3, 5e-3, 1e-2, 5e-2, 0.2, 1.0] {
            let d = rel(a);
            assert!(d.is_finite() && d < last, "a = {a}: {d} !< {last}");
            last = d;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn beta_correction_cases() {
        assert_relative_eq!(beta_correction(464.4, 100.0).unwrap(), 453.5, max_relative = 1e-4);
        assert_eq!(beta_correction(464.4, 0.0).unwrap(), 464.4);
        let fb = 300.0;
        assert_relative_eq!(beta_correction(fb, fb / 2f64.sqrt()).unwrap(), fb / 2f64.sqrt(), max_relative = 1e-14);
        assert!(beta_correction(100.0, 100.0).is_err());
        assert!(beta_correction(100.0, 120.0).is_err());
    }

    #[test]
    fn forward_inverse_round_trip() {
        let trap = TrapSpec::standard();
        let m = row2();
        let f = mode_frequencies(&trap, &m).unwrap();
        let (r, mm) = solve_magnet(f.omega_z, f.omega_beta, &trap, 7430.0).unwrap();
        assert_relative_eq!(r, 23.6e-6, max_relative = 1e-9);
        assert_relative_eq!(mm, 675e3, max_relative = 1e-9);
        let back = mode_frequencies(&trap, &MagnetSpec::new(r, mm, 7430.0).unwrap()).unwrap();
        assert!(((back.omega_z - f.omega_z) / f.omega_z).abs() < 1e-9);
        assert!(((back.omega_beta - f.omega_beta) / f.omega_beta).abs() < 1e-9);
    }

    #[test]
    fn noise_free_inversion_has_zero_sigma() {
        let trap = TrapSpec::standard();
        let f = mode_frequencies(&trap, &row2()).unwrap();
        let est = infer_magnet(
            MeasuredModes {
                omega_z: Uncertain::exact(f.omega_z),
                omega_beta: Uncertain::exact(f.omega_beta),
            },
            InversionPriors {
                cavity_radius: Uncertain::exact(2.5e-3),
                density: Uncertain::exact(7430.0),
                gravity: PhysicalConstants::G0_DEFAULT,
            },
            InversionOptions::default(),
        )
        .unwrap();
        assert_eq!(est.radius.sigma(), 0.0);
        assert_eq!(est.magnetization.sigma(), 0.0);
        assert_relative_eq!(est.radius.value(), 23.6e-6, max_relative = 1e-9);
    }

    #[test]
    fn jacobian_matches_independent_differences() {
        // Oracle: plain forward differences of the frequency map in linear
        // parameter space, converted to log derivatives.
        let trap = TrapSpec::standard();
        let (r, m, rho) = (23.6e-6, 675e3, 7430.0);
        let jac = forward_log_jacobian(&trap, r, m, rho).unwrap();
        let base = mode_frequencies(&trap, &MagnetSpec::new(r, m, rho).unwrap()).unwrap();
        let eps = 1e-7;
        let pr = mode_frequencies(&trap, &MagnetSpec::new(r * (1.0 + eps), m, rho).unwrap()).unwrap();
        let pm = mode_frequencies(&trap, &MagnetSpec::new(r, m * (1.0 + eps), rho).unwrap()).unwrap();
        let fd = [
            [
                (pr.omega_z / base.omega_z - 1.0) / eps,
                (pm.omega_z / base.omega_z - 1.0) / eps,
            ],
            [
                (pr.omega_beta / base.omega_beta - 1.0) / eps,
                (pm.omega_beta / base.omega_beta - 1.0) / eps,
            ],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let scale = jac[i][j].abs().max(1e-2);
                assert!((jac[i][j] - fd[i][j]).abs() / scale < 1e-4, "J[{i}][{j}] {} vs {}", jac[i][j], fd[i][j]);
            }
        }
    }

    #[test]
    fn plane_estimate_inverts_plane_model() {
        let m = row2();
        let g0 = PhysicalConstants::G0_DEFAULT;
        let (wz, wb) = plane_frequencies(&m, g0);
        let (r, mm) = plane_estimate(wz, wb, 7430.0, g0);
        assert_relative_eq!(r, 23.6e-6, max_relative = 1e-10);
        assert_relative_eq!(mm, 675e3, max_relative = 1e-10);
    }
}

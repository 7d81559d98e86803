use nalgebra::Vector3;

use super::{DynamicsError, LibrationState};
use crate::MagnetSpec;

/// Torque on the magnet as a function of its easy-axis direction.
pub trait TorqueModel: Sync {
    fn torque(&self, n_hat: &Vector3<f64>) -> Vector3<f64>;

    /// Potential energy whose gradient produces [`TorqueModel::torque`].
    fn potential(&self, n_hat: &Vector3<f64>) -> f64;

    /// Fastest angular frequency set by the torque, used for step control.
    fn max_frequency(&self) -> f64;
}

/// No external torque.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeRotor;

impl TorqueModel for FreeRotor {
    fn torque(&self, _: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn potential(&self, _: &Vector3<f64>) -> f64 {
        0.0
    }

    fn max_frequency(&self) -> f64 {
        0.0
    }
}

/// Restoring torque from `U = ½ I (ω_α² n_y² + ω_β² n_z²)`, which gives
/// `T_z = −I ω_α² α` and `T_y = +I ω_β² β` for small angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicRestoringTorque {
    pub inertia: f64,
    pub omega_alpha: f64,
    pub omega_beta: f64,
}

impl HarmonicRestoringTorque {
    fn gradient(&self, n: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            0.0,
            self.inertia * self.omega_alpha.powi(2) * n.y,
            self.inertia * self.omega_beta.powi(2) * n.z,
        )
    }
}

impl TorqueModel for HarmonicRestoringTorque {
    fn torque(&self, n: &Vector3<f64>) -> Vector3<f64> {
        // T = −n × ∇U
        self.gradient(n).cross(n)
    }

    fn potential(&self, n: &Vector3<f64>) -> f64 {
        0.5 * self.inertia * (self.omega_alpha.powi(2) * n.y * n.y + self.omega_beta.powi(2) * n.z * n.z)
    }

    fn max_frequency(&self) -> f64 {
        self.omega_alpha.max(self.omega_beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub n_hat: Vector3<f64>,
    /// Angular velocity in the lab frame (rad/s).
    pub omega: Vector3<f64>,
    /// Intrinsic angular momentum magnitude (J·s).
    pub spin: f64,
    pub t: f64,
}

impl RigidBodyState {
    /// Rest state with the easy axis along x.
    pub fn at_rest(spin: f64) -> Self {
        Self {
            n_hat: Vector3::x(),
            omega: Vector3::zeros(),
            spin,
            t: 0.0,
        }
    }

    /// Embeds a libration state: `n = (cosβ cosα, cosβ sinα, sinβ)`,
    /// `Ω = n × ṅ + γ̇ n`.
    pub fn from_libration(state: &LibrationState, spin: f64, gamma_dot: f64) -> Self {
        let (sa, ca) = state.alpha.sin_cos();
        let (sb, cb) = state.beta.sin_cos();
        let n = Vector3::new(cb * ca, cb * sa, sb);
        let n_dot = Vector3::new(
            -sb * ca * state.beta_dot - cb * sa * state.alpha_dot,
            -sb * sa * state.beta_dot + cb * ca * state.alpha_dot,
            cb * state.beta_dot,
        );
        Self {
            n_hat: n,
            omega: n.cross(&n_dot) + gamma_dot * n,
            spin,
            t: state.t,
        }
    }

    /// `(α, β) = (atan2(n_y, n_x), asin(n_z))`.
    pub fn angles(&self) -> (f64, f64) {
        (self.n_hat.y.atan2(self.n_hat.x), self.n_hat.z.clamp(-1.0, 1.0).asin())
    }

    /// Total angular momentum `I Ω + S n̂`.
    pub fn total_angular_momentum(&self, inertia: f64) -> Vector3<f64> {
        inertia * self.omega + self.spin * self.n_hat
    }

    /// Rotational kinetic energy plus the torque-model potential.
    pub fn energy(&self, inertia: f64, torque: &dyn TorqueModel) -> f64 {
        0.5 * inertia * self.omega.norm_squared() + torque.potential(&self.n_hat)
    }
}

const MAX_PHASE_PER_SUBSTEP: f64 = 0.01;

type Deriv = (Vector3<f64>, Vector3<f64>);

fn rigid_rhs(n: &Vector3<f64>, w: &Vector3<f64>, inertia: f64, spin: f64, torque: &dyn TorqueModel) -> Deriv {
    // I Ω̇ = T − Ω × S n̂,  n̂̇ = Ω × n̂
    let n_dot = w.cross(n);
    let w_dot = (torque.torque(n) - spin * n_dot) / inertia;
    (n_dot, w_dot)
}

/// Integrates `I Ω̇ + Ω × S n̂ = T`, `n̂̇ = Ω × n̂` with RK4, renormalizing
/// `n̂` after every internal step. Returns `round(duration/dt)` samples.
pub fn rigid_body_integrate(
    magnet: &MagnetSpec,
    torque: &dyn TorqueModel,
    initial: RigidBodyState,
    dt: f64,
    duration: f64,
) -> Result<Vec<RigidBodyState>, DynamicsError> {
    let inertia = magnet.inertia();
    if !(dt > 0.0 && duration > 0.0 && dt.is_finite() && duration.is_finite()) {
        return Err(DynamicsError::InvalidSettings(format!(
            "dt and duration must be positive (dt = {dt}, duration = {duration})"
        )));
    }
    let norm0 = initial.n_hat.norm();
    if (norm0 - 1.0).abs() > 1e-9 {
        return Err(DynamicsError::InvalidSettings(format!("|n̂(0)| = {norm0}, expected 1")));
    }
    if !(initial.spin >= 0.0 && initial.spin.is_finite()) {
        return Err(DynamicsError::InvalidSettings(format!("spin must be non-negative, got {}", initial.spin)));
    }
    let w_fast = torque.max_frequency() + initial.omega.norm() + initial.spin / inertia;
    let substeps = ((w_fast * dt) / MAX_PHASE_PER_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let n_out = (duration / dt).round() as usize;
    if n_out < 1 {
        return Err(DynamicsError::InvalidSettings("duration shorter than one step".into()));
    }
    let spin = initial.spin;

    let mut out = Vec::with_capacity(n_out);
    let mut n = initial.n_hat / norm0;
    let mut w = initial.omega;
    out.push(RigidBodyState { n_hat: n, ..initial });
    for k in 1..n_out {
        for _ in 0..substeps {
            let f = |n: &Vector3<f64>, w: &Vector3<f64>| rigid_rhs(n, w, inertia, spin, torque);
            let (k1n, k1w) = f(&n, &w);
            let (k2n, k2w) = f(&(n + 0.5 * h * k1n), &(w + 0.5 * h * k1w));
            let (k3n, k3w) = f(&(n + 0.5 * h * k2n), &(w + 0.5 * h * k2w));
            let (k4n, k4w) = f(&(n + h * k3n), &(w + h * k3w));
            n += h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            let norm = n.norm();
            if !(norm.is_finite() && norm > 0.5) || !w.iter().all(|v| v.is_finite()) {
                return Err(DynamicsError::Integration {
                    t: initial.t + k as f64 * dt,
                    reason: format!("state diverged (|n̂| = {norm}, |Ω| = {})", w.norm()),
                });
            }
            n /= norm;
        }
        out.push(RigidBodyState {
            n_hat: n,
            omega: w,
            spin,
            t: initial.t + k as f64 * dt,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{einstein_de_haas_frequency, linearized_integrate, Inertia, LibrationParams};
    use crate::{hz_to_angular, PhysicalConstants};
    use std::f64::consts::PI;

    fn magnet() -> MagnetSpec {
        MagnetSpec::new(23.6e-6, 675e3, 7430.0).unwrap()
    }

    fn spin(m: &MagnetSpec) -> f64 {
        m.moment() * PhysicalConstants::HBAR / (1.19 * PhysicalConstants::MU_B)
    }

    #[test]
    fn torque_matches_small_angle_signs() {
        let t = HarmonicRestoringTorque { inertia: 2.0, omega_alpha: 3.0, omega_beta: 5.0 };
        let s = RigidBodyState::from_libration(&LibrationState::new(1e-6, 0.0, 0.0, 0.0), 0.0, 0.0);
        let tq = t.torque(&s.n_hat);
        assert!((tq.z + 2.0 * 9.0 * 1e-6).abs() < 1e-15);
        let s = RigidBodyState::from_libration(&LibrationState::new(0.0, 1e-6, 0.0, 0.0), 0.0, 0.0);
        let tq = t.torque(&s.n_hat);
        assert!((tq.y - 2.0 * 25.0 * 1e-6).abs() < 1e-15);
    }

    #[test]
    fn libration_embedding_round_trips() {
        let l = LibrationState::new(0.2, -0.1, 3.0, 4.0);
        let s = RigidBodyState::from_libration(&l, 1.0, 0.0);
        let (a, b) = s.angles();
        assert!((a - 0.2).abs() < 1e-15 && (b + 0.1).abs() < 1e-15);
        assert!((s.n_hat.norm() - 1.0).abs() < 1e-15);
        assert!(s.omega.dot(&s.n_hat).abs() < 1e-14);
    }

    #[test]
    fn torque_free_rest_is_stationary() {
        let m = magnet();
        let s0 = RigidBodyState::at_rest(spin(&m));
        let traj = rigid_body_integrate(&m, &FreeRotor, s0, 1e-3, 1.0).unwrap();
        assert!(traj.iter().all(|s| s.n_hat == s0.n_hat && s.omega == s0.omega));
    }

    #[test]
    fn free_precession_conserves_and_matches_period() {
        let m = magnet();
        let s = spin(&m);
        let i = m.inertia();
        let wi = einstein_de_haas_frequency(s, Inertia::Isotropic(i)).unwrap();
        let s0 = RigidBodyState {
            n_hat: Vector3::x(),
            omega: Vector3::new(0.0, 0.0, wi),
            spin: s,
            t: 0.0,
        };
        let j0 = s0.total_angular_momentum(i);
        let e0 = s0.energy(i, &FreeRotor);
        // Precession about J at |J|/I; here |J| = √2·S.
        let period = 2.0 * PI * i / j0.norm();
        assert!((period - 2.0 * PI / (2f64.sqrt() * wi)).abs() < 1e-12 * period);
        let dt = period / 400.0;
        let traj = rigid_body_integrate(&m, &FreeRotor, s0, dt, 100.0 * period).unwrap();
        let mut worst_j = 0.0f64;
        let mut worst_e = 0.0f64;
        for st in &traj {
            let j = st.total_angular_momentum(i);
            for c in 0..3 {
                worst_j = worst_j.max((j[c] - j0[c]).abs() / j0.norm());
            }
            worst_e = worst_e.max((st.energy(i, &FreeRotor) - e0).abs() / e0);
            assert!((st.n_hat.norm() - 1.0).abs() < 1e-9);
        }
        assert!(worst_j < 1e-8, "J drift {worst_j:e}");
        assert!(worst_e < 1e-8, "energy drift {worst_e:e}");

        // Measure the period from successive returns of n̂ to its start.
        let axis = j0.normalize();
        let perp0 = (s0.n_hat - axis * axis.dot(&s0.n_hat)).normalize();
        let perp1 = axis.cross(&perp0);
        let phase: Vec<f64> = traj
            .iter()
            .map(|st| {
                let v = st.n_hat - axis * axis.dot(&st.n_hat);
                v.dot(&perp1).atan2(v.dot(&perp0))
            })
            .collect();
        let mut total = 0.0;
        for w in phase.windows(2) {
            let mut d = w[1] - w[0];
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            total += d;
        }
        let t_end = traj.last().unwrap().t;
        let measured = 2.0 * PI * t_end / total.abs();
        assert!((measured - period).abs() / period < 1e-3, "{measured} vs {period}");
    }

    fn small_angle_error(theta: f64) -> f64 {
        let m = magnet();
        let i = m.inertia();
        let s = spin(&m);
        let wi = s / i;
        let (wa, wb) = (hz_to_angular(100.0), hz_to_angular(450.0));
        let torque = HarmonicRestoringTorque { inertia: i, omega_alpha: wa, omega_beta: wb };
        let p = LibrationParams::new(wa, wb, wi).unwrap();
        let l0 = LibrationState::new(theta, 0.5 * theta, 0.0, 0.0);
        let dt = 2e-6;
        let duration = 20.0 / 100.0;
        let lin = linearized_integrate(&p, l0, dt, duration, None).unwrap();
        let rig = rigid_body_integrate(&m, &torque, RigidBodyState::from_libration(&l0, s, 0.0), dt, duration).unwrap();
        let scale = lin.states.iter().map(|x| x.alpha.abs().max(x.beta.abs())).fold(0.0, f64::max);
        lin.states
            .iter()
            .zip(&rig)
            .map(|(a, b)| {
                let (ra, rb) = b.angles();
                (a.alpha - ra).abs().max((a.beta - rb).abs())
            })
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn small_angle_limit_matches_linearized() {
        assert!(small_angle_error(1e-3) < 1e-2);
    }

    #[test]
    fn nonlinear_error_scales_quadratically() {
        let amps = [1e-4, 1e-3, 1e-2, 1e-1];
        let xs: Vec<f64> = amps.iter().map(|a: &f64| a.ln()).collect();
        let ys: Vec<f64> = amps.iter().map(|&a| small_angle_error(a).ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DynamicsError, LibrationParams, LibrationState};
use crate::PhysicalConstants;

/// Time derivative of a [`LibrationState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibrationRate {
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub alpha_ddot: f64,
    pub beta_ddot: f64,
}

/// Right-hand side of
///
/// ```text
/// α̈ + ω_α² α + (ω_I + γ̇) β̇ − ε_α β̈ + 2 d_α α̇ = 0
/// β̈ + ω_β² β − (ω_I + γ̇) α̇ − ε_β α̈ + 2 d_β β̇ = 0
/// ```
///
/// solved exactly for the accelerations.
pub fn linearized_rhs(
    state: &LibrationState,
    params: &LibrationParams,
) -> Result<LibrationRate, DynamicsError> {
    let det = 1.0 - params.eps_alpha * params.eps_beta;
    if det.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateInertia(det));
    }
    let [a, b, ad, bd] = rhs_array(state.as_array(), params, det);
    Ok(LibrationRate {
        alpha_dot: a,
        beta_dot: b,
        alpha_ddot: ad,
        beta_ddot: bd,
    })
}

#[inline]
fn rhs_array(x: [f64; 4], p: &LibrationParams, det: f64) -> [f64; 4] {
    let [alpha, beta, alpha_dot, beta_dot] = x;
    let w = p.coupling();
    let f_alpha = -p.omega_alpha * p.omega_alpha * alpha - w * beta_dot - 2.0 * p.damping_alpha * alpha_dot;
    let f_beta = -p.omega_beta * p.omega_beta * beta + w * alpha_dot - 2.0 * p.damping_beta * beta_dot;
    let alpha_ddot = (f_alpha + p.eps_alpha * f_beta) / det;
    let beta_ddot = (f_beta + p.eps_beta * f_alpha) / det;
    [alpha_dot, beta_dot, alpha_ddot, beta_ddot]
}

fn rk4_step(x: [f64; 4], h: f64, p: &LibrationParams, det: f64) -> [f64; 4] {
    let add = |x: [f64; 4], k: [f64; 4], s: f64| {
        [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2], x[3] + s * k[3]]
    };
    let k1 = rhs_array(x, p, det);
    let k2 = rhs_array(add(x, k1, 0.5 * h), p, det);
    let k3 = rhs_array(add(x, k2, 0.5 * h), p, det);
    let k4 = rhs_array(add(x, k3, h), p, det);
    let mut out = x;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Uniformly sampled libration trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<LibrationState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.alpha).collect()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.beta).collect()
    }
}

/// Largest internal step, in units of the fastest angular frequency.
const MAX_PHASE_PER_SUBSTEP: f64 = 0.025;

/// Integrates the linearized equations, returning `round(duration/dt)`
/// samples at `t = t0 + k·dt`.
///
/// Each output interval is split into equal RK4 substeps. When
/// `temperature > 0` a Langevin torque with `σ = sqrt(4 k_B T d I)` per
/// unit bandwidth is applied as a velocity kick after each substep, drawn
/// from a ChaCha stream keyed by `seed` (0 if absent).
pub fn linearized_integrate(
    params: &LibrationParams,
    initial: LibrationState,
    dt: f64,
    duration: f64,
    seed: Option<u64>,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    if !(dt > 0.0 && duration > 0.0 && dt.is_finite() && duration.is_finite()) {
        return Err(DynamicsError::InvalidSettings(format!(
            "dt and duration must be positive (dt = {dt}, duration = {duration})"
        )));
    }
    let f_max = params.omega_alpha.max(params.omega_beta) / (2.0 * std::f64::consts::PI);
    let limit = 1.0 / (50.0 * f_max);
    if dt > limit * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { dt, limit });
    }
    let det = 1.0 - params.eps_alpha * params.eps_beta;
    if det.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateInertia(det));
    }

    let n = (duration / dt).round() as usize;
    if n < 1 {
        return Err(DynamicsError::InvalidSettings("duration shorter than one step".into()));
    }
    let w_fast = params.omega_alpha.max(params.omega_beta) + params.coupling().abs();
    let substeps = ((w_fast * dt) / MAX_PHASE_PER_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;

    let thermal = params.temperature > 0.0;
    let kick = |damping: f64| {
        if thermal {
            (4.0 * PhysicalConstants::K_B * params.temperature * damping * h / params.inertia).sqrt()
        } else {
            0.0
        }
    };
    let (kick_alpha, kick_beta) = (kick(params.damping_alpha), kick(params.damping_beta));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));

    let mut states = Vec::with_capacity(n);
    let mut x = initial.as_array();
    let t0 = initial.t;
    states.push(LibrationState::from_array(x, t0));
    let mut warned = false;
    for k in 1..n {
        for _ in 0..substeps {
            x = rk4_step(x, h, params, det);
            if thermal {
                let xa: f64 = StandardNormal.sample(&mut rng);
                let xb: f64 = StandardNormal.sample(&mut rng);
                let (ta, tb) = (kick_alpha * xa, kick_beta * xb);
                x[2] += (ta + params.eps_alpha * tb) / det;
                x[3] += (tb + params.eps_beta * ta) / det;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::Integration {
                t: t0 + k as f64 * dt,
                reason: "state became non-finite".into(),
            });
        }
        let s = LibrationState::from_array(x, t0 + k as f64 * dt);
        if !warned && s.exceeds_small_angle() {
            log::warn!("libration angle above {} rad; linearized model is leaving its range", LibrationState::SMALL_ANGLE_ADVISORY);
            warned = true;
        }
        states.push(s);
    }
    Ok(Trajectory { dt, states })
}

/// Per-unit-inertia mode energies `½(α̇² + ω_α²α²)` and `½(β̇² + ω_β²β²)`.
pub fn mode_energies(state: &LibrationState, params: &LibrationParams) -> (f64, f64) {
    (
        0.5 * (state.alpha_dot.powi(2) + (params.omega_alpha * state.alpha).powi(2)),
        0.5 * (state.beta_dot.powi(2) + (params.omega_beta * state.beta).powi(2)),
    )
}

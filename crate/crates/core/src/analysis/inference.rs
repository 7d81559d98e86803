use super::{AnalysisError, PhaseComponents};
use crate::uncertain::{combine, Uncertain};
use crate::{IonComposition, PhysicalConstants};

/// Out-of-phase cross component over the in-phase auto component of the
/// excited mode's main channel.
pub fn r_factor(s_cross: &PhaseComponents, c_auto: &PhaseComponents) -> Result<f64, AnalysisError> {
    if c_auto.c == 0.0 || !c_auto.c.is_finite() || c_auto.c.abs() < 3.0 * c_auto.sigma_c {
        return Err(AnalysisError::NoExcitation(c_auto.c));
    }
    Ok(s_cross.s / c_auto.c)
}

/// `ω_I = sqrt(r_α r_β)·|ω_β² − ω_α²| / sqrt(ω_α ω_β)`.
///
/// The product is formed from the signed r values. A product more than 3σ
/// below zero is rejected; otherwise it is clamped at zero. Near zero the
/// square-root derivative is bounded by evaluating it at `max(P, σ_P/4)`.
pub fn omega_i_from_r(
    r_alpha: Uncertain,
    r_beta: Uncertain,
    omega_alpha: f64,
    omega_beta: f64,
) -> Result<Uncertain, AnalysisError> {
    if !(omega_alpha > 0.0 && omega_beta > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "mode frequencies must be positive ({omega_alpha}, {omega_beta})"
        )));
    }
    if omega_alpha == omega_beta {
        return Err(AnalysisError::DegenerateFrequencies);
    }
    let (ra, rb) = (r_alpha.value(), r_beta.value());
    let (sa, sb) = (r_alpha.sigma(), r_beta.sigma());
    let product = ra * rb;
    // Exact variance of a product of independent variables.
    let sigma_p = (rb * rb * sa * sa + ra * ra * sb * sb + sa * sa * sb * sb).sqrt();
    if product < -3.0 * sigma_p {
        return Err(AnalysisError::InconsistentSigns { product, sigma: sigma_p });
    }
    let k = (omega_beta.powi(2) - omega_alpha.powi(2)).abs() / (omega_alpha * omega_beta).sqrt();
    let p = product.max(0.0);
    let value = k * p.sqrt();
    let sigma = if sigma_p == 0.0 {
        0.0
    } else {
        k * sigma_p / (2.0 * p.max(0.25 * sigma_p).sqrt())
    };
    Ok(Uncertain::new(value, sigma)?)
}

/// `g = (µ/µ_B)/(S/ħ)`.
pub fn g_factor(mu: Uncertain, spin: Uncertain) -> Result<Uncertain, AnalysisError> {
    if !(mu.value() > 0.0 && spin.value() > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "moment and spin must be positive ({}, {})",
            mu.value(),
            spin.value()
        )));
    }
    Ok(combine(
        |x| x[0] * PhysicalConstants::HBAR / (x[1] * PhysicalConstants::MU_B),
        &[mu, spin],
    )?)
}

/// g from sphere radius, magnetization, density and measured `ω_I`, with
/// `µ = M·V` and `S = I·ω_I = (2/5)ρ V R² ω_I`.
pub fn g_factor_from_magnet(
    radius: Uncertain,
    magnetization: Uncertain,
    density: Uncertain,
    omega_i: Uncertain,
) -> Result<Uncertain, AnalysisError> {
    for (name, u) in [("radius", radius), ("magnetization", magnetization), ("density", density), ("ω_I", omega_i)] {
        if !(u.value() > 0.0) {
            return Err(AnalysisError::InvalidArgument(format!("{name} must be positive, got {}", u.value())));
        }
    }
    Ok(combine(
        |x| x[1] * PhysicalConstants::HBAR / (0.4 * x[2] * x[0] * x[0] * x[3] * PhysicalConstants::MU_B),
        &[radius, magnetization, density, omega_i],
    )?)
}

/// Angular-momentum-weighted mean g of an ion composition.
pub fn g_eff_reference(composition: &IonComposition) -> f64 {
    composition.effective_g()
}

/// Outcome of the calibration-free measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub r_alpha: Uncertain,
    pub r_beta: Uncertain,
    /// rad/s
    pub omega_i: Uncertain,
    /// Hz
    pub f_i: Uncertain,
    /// Present when the magnet's radius and magnetization are known.
    pub g: Option<Uncertain>,
    pub n_repetitions_alpha: usize,
    pub n_repetitions_beta: usize,
}

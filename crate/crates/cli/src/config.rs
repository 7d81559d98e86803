//! Run configuration. Every physical quantity carries its unit in the key
//! name; unknown keys are rejected so a typo never silently becomes a default.

use std::path::Path;

use gyrolev::dynamics::LibrationParams;
use gyrolev::magnetostatics::{find_equilibrium, mode_frequencies};
use gyrolev::pipeline::{Acquisition, SimulationSpec};
use gyrolev::signal::MixingMatrix;
use gyrolev::{hz_to_angular, MagnetSpec, PhysicalConstants, TrapSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetConfig {
    pub radius_um: f64,
    pub magnetization_ka_per_m: f64,
    #[serde(default = "default_density")]
    pub density_kg_per_m3: f64,
}

fn default_density() -> f64 {
    7430.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    pub cavity_radius_mm: f64,
    pub gravity_m_per_s2: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            cavity_radius_mm: 2.5,
            gravity_m_per_s2: PhysicalConstants::G0_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibrationConfig {
    /// Residual-field mode; not derivable from the trap model.
    pub f_alpha_hz: f64,
    /// Tilt mode; when absent, the trap model plus the residual-field
    /// stiffness: `sqrt(f_model² + f_α²)`.
    #[serde(default)]
    pub f_beta_hz: Option<f64>,
    /// Injected Einstein–de Haas frequency; when absent it follows from the
    /// magnet and `g_factor`.
    #[serde(default)]
    pub f_i_hz: Option<f64>,
    #[serde(default = "default_g")]
    pub g_factor: f64,
    #[serde(default)]
    pub gamma_dot_rad_per_s: f64,
    #[serde(default)]
    pub eps_alpha: f64,
    #[serde(default)]
    pub eps_beta: f64,
    #[serde(default = "default_tau")]
    pub damping_time_s: f64,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

fn default_g() -> f64 {
    1.19
}

fn default_tau() -> f64 {
    20.0
}

fn default_temperature() -> f64 {
    4.18
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub repetitions_alpha: usize,
    pub repetitions_beta: usize,
    pub excitation_rad: f64,
    pub noise_rms_v: f64,
    pub seed: u64,
    pub thermal_gamma_dot: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        let a = Acquisition::default();
        Self {
            sample_rate_hz: a.sample_rate_hz,
            duration_s: a.duration_s,
            repetitions_alpha: a.repetitions_alpha,
            repetitions_beta: a.repetitions_beta,
            excitation_rad: a.excitation_rad,
            noise_rms_v: a.noise_rms_v,
            seed: a.seed,
            thermal_gamma_dot: a.thermal_gamma_dot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self { a: 1.0, b: 0.03, c: -0.02, d: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub magnet: MagnetConfig,
    #[serde(default)]
    pub trap: TrapConfig,
    pub libration: LibrationConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub mixing: MixingConfig,
    #[serde(default)]
    pub label: String,
}

/// A validated configuration with every derived quantity resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub magnet: MagnetSpec,
    pub trap: TrapSpec,
    pub spec: SimulationSpec,
    pub height_m: f64,
    pub f_z_hz: f64,
    pub f_beta_model_hz: f64,
}

fn field<E: std::fmt::Display>(name: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{name}: {e}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn resolve(self) -> Result<ResolvedRun, CliError> {
        let m = &self.magnet;
        let magnet = MagnetSpec::new(m.radius_um * 1e-6, m.magnetization_ka_per_m * 1e3, m.density_kg_per_m3)
            .map_err(field("magnet"))?;
        let trap = TrapSpec::new(self.trap.cavity_radius_mm * 1e-3, self.trap.gravity_m_per_s2).map_err(field("trap"))?;
        let eq = find_equilibrium(&trap, &magnet).map_err(field("magnet"))?;
        let modes = mode_frequencies(&trap, &magnet).map_err(field("magnet"))?;

        let l = &self.libration;
        if !(l.f_alpha_hz > 0.0 && l.f_alpha_hz.is_finite()) {
            return Err(CliError::Config(format!("libration.f_alpha_hz must be positive, got {}", l.f_alpha_hz)));
        }
        let f_beta = l.f_beta_hz.unwrap_or_else(|| modes.f_beta_hz().hypot(l.f_alpha_hz));
        let omega_i = match l.f_i_hz {
            Some(f) => hz_to_angular(f),
            None => {
                if !(l.g_factor > 0.0) {
                    return Err(CliError::Config(format!("libration.g_factor must be positive, got {}", l.g_factor)));
                }
                let spin = magnet.moment() * PhysicalConstants::HBAR / (l.g_factor * PhysicalConstants::MU_B);
                spin / magnet.inertia()
            }
        };
        let params = LibrationParams::new(hz_to_angular(l.f_alpha_hz), hz_to_angular(f_beta), omega_i)
            .and_then(|p| p.with_gamma_dot(l.gamma_dot_rad_per_s))
            .and_then(|p| p.with_anisotropy(l.eps_alpha, l.eps_beta))
            .and_then(|p| p.with_damping_time(l.damping_time_s))
            .and_then(|p| p.with_thermal(l.temperature_k, magnet.inertia()))
            .map_err(field("libration"))?;

        let x = &self.mixing;
        let mixing = MixingMatrix::new(x.a, x.b, x.c, x.d).map_err(field("mixing"))?;
        let a = &self.acquisition;
        let spec = SimulationSpec {
            params,
            mixing,
            acquisition: Acquisition {
                sample_rate_hz: a.sample_rate_hz,
                duration_s: a.duration_s,
                repetitions_alpha: a.repetitions_alpha,
                repetitions_beta: a.repetitions_beta,
                excitation_rad: a.excitation_rad,
                noise_rms_v: a.noise_rms_v,
                seed: a.seed,
                thermal_gamma_dot: a.thermal_gamma_dot,
            },
            label: self.label.clone(),
        };
        spec.validate().map_err(field("acquisition"))?;
        Ok(ResolvedRun {
            magnet,
            trap,
            spec,
            height_m: eq.z0,
            f_z_hz: modes.f_z_hz(),
            f_beta_model_hz: modes.f_beta_hz(),
            config: self,
        })
    }
}

//! End-to-end runs shared by the command-line tool and the test suites:
//! repetition simulation, per-trace analysis, dataset aggregation and the
//! reproduction of the published particle table.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{
    aggregate_repetitions, correlate, fit_correlation_with, g_factor_from_magnet, omega_i_from_r,
    phase_components, r_factor, AnalysisError, CorrelationFit, FitOptions, FitWindow, InferenceResult,
    PhaseComponents,
};
use crate::dynamics::{
    eigenmodes, linearized_integrate, quasi_mode, thermal_gamma_dot_rms, DynamicsError, LibrationParams,
    LibrationState, ModeKind, Trajectory,
};
use crate::magnetostatics::{
    beta_correction, find_equilibrium, infer_magnet, mode_frequencies, InversionOptions, InversionPriors,
    MagnetEstimate, MagnetostaticsError, MeasuredModes, DEFAULT_FREQUENCY_REL_SIGMA,
};
use crate::seed::derive_seed;
use crate::signal::{add_measurement_noise, mix_channels, MixingMatrix, SignalError, TimeTraceSet, TraceMeta, MIN_PERIODS};
use crate::table::{TableRow, REFERENCE_DENSITY};
use crate::uncertain::UncertainError;
use crate::{angular_to_hz, hz_to_angular, ParamError, PhysicalConstants, TrapSpec, Uncertain};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Magnetostatics(#[from] MagnetostaticsError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Uncertainty(#[from] UncertainError),
    #[error("no {0} traces to analyze")]
    MissingMode(ModeKind),
    #[error("{failed} of {total} {mode} repetitions could not be analyzed; first failure: {first}")]
    TooManyFailures {
        mode: ModeKind,
        failed: usize,
        total: usize,
        first: String,
    },
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Acquisition protocol for one simulated measurement campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub repetitions_alpha: usize,
    pub repetitions_beta: usize,
    /// Amplitude of the driven mode at the start of each record, rad.
    pub excitation_rad: f64,
    /// White noise per channel, V.
    pub noise_rms_v: f64,
    pub seed: u64,
    /// Draw a thermal spin rate γ̇ for each repetition when T > 0.
    pub thermal_gamma_dot: bool,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            sample_rate_hz: 32_000.0,
            duration_s: 0.5,
            repetitions_alpha: 128,
            repetitions_beta: 64,
            excitation_rad: 1e-2,
            noise_rms_v: 1e-4,
            seed: 1,
            thermal_gamma_dot: true,
        }
    }
}

impl Acquisition {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn repetitions(&self, mode: ModeKind) -> usize {
        match mode {
            ModeKind::QuasiAlpha => self.repetitions_alpha,
            ModeKind::QuasiBeta => self.repetitions_beta,
        }
    }
}

/// Everything needed to simulate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub params: LibrationParams,
    pub mixing: MixingMatrix,
    pub acquisition: Acquisition,
    pub label: String,
}

fn mode_stream(mode: ModeKind) -> u64 {
    match mode {
        ModeKind::QuasiAlpha => 0,
        ModeKind::QuasiBeta => 1,
    }
}

/// Seed of repetition `index` of `mode` under `master`.
pub fn repetition_seed(master: u64, mode: ModeKind, index: usize) -> u64 {
    derive_seed(master, mode_stream(mode), index as u64)
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let a = &self.acquisition;
        let bad = |m: String| Err(PipelineError::InvalidSettings(m));
        if !(a.sample_rate_hz > 0.0 && a.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate must be positive, got {}", a.sample_rate_hz));
        }
        if !(a.duration_s > 0.0 && a.duration_s.is_finite()) {
            return bad(format!("duration must be positive, got {}", a.duration_s));
        }
        if a.repetitions_alpha < 2 || a.repetitions_beta < 2 {
            return bad("at least 2 repetitions per mode are required".into());
        }
        if !(a.excitation_rad > 0.0 && a.excitation_rad.is_finite()) {
            return bad(format!("excitation must be positive, got {}", a.excitation_rad));
        }
        if !(a.noise_rms_v >= 0.0 && a.noise_rms_v.is_finite()) {
            return bad(format!("noise rms must be non-negative, got {}", a.noise_rms_v));
        }
        let f_max = angular_to_hz(self.params.omega_alpha.max(self.params.omega_beta));
        if a.sample_rate_hz < 50.0 * f_max * (1.0 - 1e-12) {
            return bad(format!(
                "sample rate {} Hz is below 50 × the fastest mode ({f_max:.1} Hz)",
                a.sample_rate_hz
            ));
        }
        for mode in [ModeKind::QuasiAlpha, ModeKind::QuasiBeta] {
            let periods = a.n_samples() as f64 * a.dt() * angular_to_hz(self.params.omega(mode));
            if periods < MIN_PERIODS {
                return bad(format!(
                    "duration {} s covers {periods:.1} periods of the {mode} mode, need {MIN_PERIODS}",
                    a.duration_s
                ));
            }
        }
        Ok(())
    }

    fn meta(&self, mode: ModeKind, index: usize) -> TraceMeta {
        TraceMeta {
            mode_excited: mode,
            f_alpha: angular_to_hz(self.params.omega_alpha),
            f_beta: angular_to_hz(self.params.omega_beta),
            seed: repetition_seed(self.acquisition.seed, mode, index),
            label: if self.label.is_empty() {
                format!("{mode} {index}")
            } else {
                format!("{} {mode} {index}", self.label)
            },
        }
    }
}

/// Starting state on the excited mode with a random phase, on top of a
/// thermal draw of both modes when the temperature is positive.
fn initial_state(params: &LibrationParams, mode: ModeKind, amplitude: f64, rng: &mut ChaCha8Rng) -> Result<LibrationState> {
    let phase = rng.random_range(0.0..2.0 * PI);
    let mut state = match eigenmodes(params) {
        Ok(modes) => {
            let m = modes.iter().find(|m| m.kind == mode).expect("both modes returned");
            m.state_at(amplitude, phase, 0.0)
        }
        Err(DynamicsError::NonConservative) => {
            let q = quasi_mode(params, mode, amplitude)?;
            let mut s = q.state_at(phase / q.frequency);
            s.t = 0.0;
            s
        }
        Err(e) => return Err(e.into()),
    };
    if params.temperature > 0.0 {
        let kt = PhysicalConstants::K_B * params.temperature;
        let i = params.inertia;
        let n = |s: f64, rng: &mut ChaCha8Rng| Normal::new(0.0, s).expect("finite sigma").sample(rng);
        state.alpha += n((kt / (i * params.omega_alpha.powi(2))).sqrt(), rng);
        state.beta += n((kt / (i * params.omega_beta.powi(2))).sqrt(), rng);
        state.alpha_dot += n((kt / i).sqrt(), rng);
        state.beta_dot += n((kt / i).sqrt(), rng);
    }
    Ok(state)
}

/// Noise-free angular trajectory of one repetition.
pub fn simulate_trajectory(spec: &SimulationSpec, mode: ModeKind, index: usize) -> Result<Trajectory> {
    let seed = repetition_seed(spec.acquisition.seed, mode, index);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0));
    let mut params = spec.params;
    if spec.acquisition.thermal_gamma_dot && params.temperature > 0.0 {
        let rms = thermal_gamma_dot_rms(params.temperature, params.inertia);
        params.gamma_dot += Normal::new(0.0, rms).expect("finite sigma").sample(&mut rng);
    }
    let start = initial_state(&params, mode, spec.acquisition.excitation_rad, &mut rng)?;
    let a = &spec.acquisition;
    Ok(linearized_integrate(
        &params,
        start,
        a.dt(),
        a.n_samples() as f64 * a.dt(),
        Some(derive_seed(seed, 1, 0)),
    )?)
}

/// Detector traces of a trajectory: mixing, then white noise.
pub fn acquire(
    traj: &Trajectory,
    mixing: &MixingMatrix,
    noise_rms: f64,
    noise_seed: u64,
    meta: TraceMeta,
) -> Result<TimeTraceSet> {
    let (mut v1, mut v2) = mix_channels(traj, mixing);
    add_measurement_noise(&mut v1, &mut v2, noise_rms, noise_seed)?;
    Ok(TimeTraceSet::new(traj.dt, v1, v2, meta)?)
}

/// Seed of the measurement noise of a repetition.
pub fn noise_seed(spec: &SimulationSpec, mode: ModeKind, index: usize) -> u64 {
    derive_seed(repetition_seed(spec.acquisition.seed, mode, index), 2, 0)
}

pub fn simulate_repetition(spec: &SimulationSpec, mode: ModeKind, index: usize) -> Result<TimeTraceSet> {
    let traj = simulate_trajectory(spec, mode, index)?;
    acquire(
        &traj,
        &spec.mixing,
        spec.acquisition.noise_rms_v,
        noise_seed(spec, mode, index),
        spec.meta(mode, index),
    )
}

/// Traces of both mode classes, ordered by repetition index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub alpha: Vec<TimeTraceSet>,
    pub beta: Vec<TimeTraceSet>,
}

/// Simulates every repetition; repetitions run in parallel and the result
/// does not depend on the thread count.
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<Dataset> {
    spec.validate()?;
    let run = |mode| -> Result<Vec<TimeTraceSet>> {
        (0..spec.acquisition.repetitions(mode))
            .into_par_iter()
            .map(|i| simulate_repetition(spec, mode, i))
            .collect()
    };
    Ok(Dataset {
        alpha: run(ModeKind::QuasiAlpha)?,
        beta: run(ModeKind::QuasiBeta)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub window: FitWindow,
    /// Largest tolerated fraction of failed repetitions per mode.
    pub max_failure_fraction: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            window: FitWindow::Full,
            max_failure_fraction: 0.2,
        }
    }
}

/// Fits of one repetition: the excited mode's main-channel autocorrelation
/// and the cross-correlation into the other channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionAnalysis {
    pub mode: ModeKind,
    pub auto_fit: CorrelationFit,
    pub cross_fit: CorrelationFit,
    pub auto: PhaseComponents,
    pub cross: PhaseComponents,
    pub r: f64,
}

/// quasi-α: `r = s₁₂/c₁₁`; quasi-β: `r = s₂₁/c₂₂`, with `C_ij(k) = Σ V_i[n+k] V_j[n]`.
pub fn analyze_trace(trace: &TimeTraceSet, opts: AnalysisOptions) -> std::result::Result<RepetitionAnalysis, AnalysisError> {
    let meta = trace.meta();
    let (main, other, f) = match meta.mode_excited {
        ModeKind::QuasiAlpha => (trace.v1(), trace.v2(), meta.f_alpha),
        ModeKind::QuasiBeta => (trace.v2(), trace.v1(), meta.f_beta),
    };
    let lag = trace.n_samples() - 1;
    let guess = hz_to_angular(f);
    let fit_opts = FitOptions {
        window: opts.window,
        ..FitOptions::default()
    };
    let auto_fit = fit_correlation_with(&correlate(main, main, trace.dt(), lag)?, guess, fit_opts)?;
    let cross_fit = fit_correlation_with(&correlate(main, other, trace.dt(), lag)?, guess, fit_opts)?;
    let auto = phase_components(&auto_fit);
    let cross = phase_components(&cross_fit);
    let r = r_factor(&cross, &auto)?;
    Ok(RepetitionAnalysis {
        mode: meta.mode_excited,
        auto_fit,
        cross_fit,
        auto,
        cross,
        r,
    })
}

/// Independent knowledge of the magnet, for converting ω_I into g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetPriors {
    pub radius: Uncertain,
    pub magnetization: Uncertain,
    pub density: Uncertain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetAnalysis {
    pub alpha: Vec<RepetitionAnalysis>,
    pub beta: Vec<RepetitionAnalysis>,
    pub failed_alpha: usize,
    pub failed_beta: usize,
    pub result: InferenceResult,
}

impl DatasetAnalysis {
    /// Mean and SEM of the cross-correlation phases of one mode class.
    pub fn cross_phases(&self, mode: ModeKind) -> Vec<f64> {
        let reps = match mode {
            ModeKind::QuasiAlpha => &self.alpha,
            ModeKind::QuasiBeta => &self.beta,
        };
        reps.iter().map(|r| r.cross_fit.phi).collect()
    }
}

fn analyze_class(
    traces: &[TimeTraceSet],
    mode: ModeKind,
    opts: AnalysisOptions,
) -> Result<(Vec<RepetitionAnalysis>, usize)> {
    if traces.is_empty() {
        return Err(PipelineError::MissingMode(mode));
    }
    if let Some(t) = traces.iter().find(|t| t.meta().mode_excited != mode) {
        return Err(PipelineError::InvalidSettings(format!(
            "trace {:?} is labelled {} but was passed as {mode}",
            t.meta().label,
            t.meta().mode_excited
        )));
    }
    let results: Vec<_> = traces.par_iter().map(|t| analyze_trace(t, opts)).collect();
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first = None;
    for r in results {
        match r {
            Ok(a) => ok.push(a),
            Err(e) => {
                log::warn!("{mode} repetition failed: {e}");
                first.get_or_insert(e.to_string());
            }
        }
    }
    let failed = total - ok.len();
    if failed as f64 > opts.max_failure_fraction * total as f64 || ok.len() < 2 {
        return Err(PipelineError::TooManyFailures {
            mode,
            failed,
            total,
            first: first.unwrap_or_default(),
        });
    }
    Ok((ok, failed))
}

/// Per-repetition fits → aggregated r factors → ω_I (→ g when the magnet
/// is known). `omega_alpha`, `omega_beta` are the bare mode frequencies.
pub fn analyze_dataset(
    alpha: &[TimeTraceSet],
    beta: &[TimeTraceSet],
    omega_alpha: f64,
    omega_beta: f64,
    magnet: Option<MagnetPriors>,
    opts: AnalysisOptions,
) -> Result<DatasetAnalysis> {
    let (ra, failed_alpha) = analyze_class(alpha, ModeKind::QuasiAlpha, opts)?;
    let (rb, failed_beta) = analyze_class(beta, ModeKind::QuasiBeta, opts)?;
    let r_alpha = aggregate_repetitions(&ra.iter().map(|x| x.r).collect::<Vec<_>>())?;
    let r_beta = aggregate_repetitions(&rb.iter().map(|x| x.r).collect::<Vec<_>>())?;
    let omega_i = omega_i_from_r(r_alpha, r_beta, omega_alpha, omega_beta)?;
    let f_i = omega_i.scale(1.0 / (2.0 * PI));
    let g = match magnet {
        Some(m) if omega_i.value() > 0.0 => Some(g_factor_from_magnet(m.radius, m.magnetization, m.density, omega_i)?),
        _ => None,
    };
    Ok(DatasetAnalysis {
        result: InferenceResult {
            r_alpha,
            r_beta,
            omega_i,
            f_i,
            g,
            n_repetitions_alpha: ra.len(),
            n_repetitions_beta: rb.len(),
        },
        alpha: ra,
        beta: rb,
        failed_alpha,
        failed_beta,
    })
}

/// Settings for reproducing the published particle table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub f_alpha_hz: f64,
    pub temperature: f64,
    pub damping_time_s: f64,
    pub acquisition: Acquisition,
    pub mixing: MixingMatrix,
    pub trap: TrapSpec,
    /// Relative uncertainty assigned to the measured f_z and f_β.
    pub frequency_rel_sigma: f64,
    pub priors: InversionPriors,
    pub mc_samples: usize,
    pub analysis: AnalysisOptions,
}

/// Detector noise of the built-in reproduction, V. Chosen so the SEM of
/// f_I over 128/64 repetitions is at the 0.02 to 0.04 Hz level.
pub const REPRODUCE_NOISE_RMS_V: f64 = 2e-4;

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            f_alpha_hz: 100.0,
            temperature: 4.18,
            damping_time_s: 20.0,
            acquisition: Acquisition {
                noise_rms_v: REPRODUCE_NOISE_RMS_V,
                ..Acquisition::default()
            },
            mixing: MixingMatrix {
                a: 1.0,
                b: 0.03,
                c: -0.02,
                d: 0.95,
            },
            trap: TrapSpec::standard(),
            frequency_rel_sigma: DEFAULT_FREQUENCY_REL_SIGMA,
            priors: InversionPriors::default(),
            mc_samples: crate::uncertain::DEFAULT_MC_SAMPLES,
            analysis: AnalysisOptions::default(),
        }
    }
}

/// Whether a reproduced quantity agrees with the published one within
/// three combined standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub reproduced: Uncertain,
    pub published: Uncertain,
}

impl Comparison {
    /// Difference in units of the combined standard deviation.
    pub fn pull(&self) -> f64 {
        self.reproduced.pull(&self.published)
    }

    pub fn passes(&self) -> bool {
        self.pull().abs() <= 3.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowReproduction {
    pub row: TableRow,
    /// Equilibrium height above the cavity bottom, m.
    pub height: f64,
    pub f_z_hz: f64,
    /// Tilt frequency from the trap model alone, Hz.
    pub f_beta_model_hz: f64,
    /// Tilt frequency including the residual-field stiffness, Hz.
    pub f_beta_measured_hz: f64,
    pub magnet: MagnetEstimate,
    pub inference: InferenceResult,
    pub radius: Comparison,
    pub magnetization: Comparison,
    pub f_i: Comparison,
    pub g: Option<Comparison>,
}

impl RowReproduction {
    pub fn passes(&self) -> bool {
        self.radius.passes()
            && self.magnetization.passes()
            && self.f_i.passes()
            && self.g.map(|c| c.passes()).unwrap_or(false)
    }
}

/// Simulation spec for one published row: the magnet sets f_β and the
/// inertia, f_α is the residual-field mode, ω_I is the published value.
pub fn row_simulation(row: &TableRow, opts: &ReproduceOptions) -> Result<(SimulationSpec, f64, f64, f64)> {
    let magnet = row.magnet()?;
    let eq = find_equilibrium(&opts.trap, &magnet)?;
    let modes = mode_frequencies(&opts.trap, &magnet)?;
    let omega_alpha = hz_to_angular(opts.f_alpha_hz);
    // The tilt mode also feels the residual field that sets the α mode.
    let omega_beta = modes.omega_beta.hypot(omega_alpha);
    let params = LibrationParams::new(omega_alpha, omega_beta, hz_to_angular(row.f_i.value()))?
        .with_damping_time(opts.damping_time_s)?
        .with_thermal(opts.temperature, magnet.inertia())?;
    let acquisition = Acquisition {
        seed: derive_seed(opts.acquisition.seed, 100 + row.index as u64, 0),
        ..opts.acquisition
    };
    let spec = SimulationSpec {
        params,
        mixing: opts.mixing,
        acquisition,
        label: format!("row {}", row.index),
    };
    Ok((spec, eq.z0, modes.omega_z, modes.omega_beta))
}

/// Simulates and analyzes one published row and compares the outcome.
pub fn reproduce_row(row: &TableRow, opts: &ReproduceOptions) -> Result<RowReproduction> {
    let (spec, height, omega_z, omega_beta_model) = row_simulation(row, opts)?;
    let data = simulate_dataset(&spec)?;

    let f_alpha = angular_to_hz(spec.params.omega_alpha);
    let f_beta = angular_to_hz(spec.params.omega_beta);
    let f_beta_corrected = beta_correction(f_beta, f_alpha)?;
    let rel = opts.frequency_rel_sigma;
    let measured = MeasuredModes {
        omega_z: Uncertain::with_relative(omega_z, rel)?,
        omega_beta: Uncertain::with_relative(hz_to_angular(f_beta_corrected), rel)?,
    };
    let magnet = infer_magnet(
        measured,
        opts.priors,
        InversionOptions {
            mc_samples: opts.mc_samples,
            seed: derive_seed(opts.acquisition.seed, 200 + row.index as u64, 0),
        },
    )?;
    let priors = MagnetPriors {
        radius: magnet.radius,
        magnetization: magnet.magnetization,
        density: Uncertain::new(REFERENCE_DENSITY, opts.priors.density.sigma())?,
    };
    let analysis = analyze_dataset(
        &data.alpha,
        &data.beta,
        spec.params.omega_alpha,
        spec.params.omega_beta,
        Some(priors),
        opts.analysis,
    )?;
    let inference = analysis.result;
    Ok(RowReproduction {
        row: *row,
        height,
        f_z_hz: angular_to_hz(omega_z),
        f_beta_model_hz: angular_to_hz(omega_beta_model),
        f_beta_measured_hz: f_beta,
        radius: Comparison { reproduced: magnet.radius, published: row.radius },
        magnetization: Comparison { reproduced: magnet.magnetization, published: row.magnetization },
        f_i: Comparison { reproduced: inference.f_i, published: row.f_i },
        g: inference.g.map(|g| Comparison { reproduced: g, published: row.g }),
        magnet,
        inference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::eigenmodes;

    fn spec(f_i: f64, noise: f64, reps: usize) -> SimulationSpec {
        let params = LibrationParams::new(hz_to_angular(100.0), hz_to_angular(464.4), hz_to_angular(f_i))
            .unwrap()
            .with_damping_time(20.0)
            .unwrap();
        SimulationSpec {
            params,
            mixing: MixingMatrix::new(1.0, 0.03, 0.03, 1.0).unwrap(),
            acquisition: Acquisition {
                repetitions_alpha: reps,
                repetitions_beta: reps,
                noise_rms_v: noise,
                ..Acquisition::default()
            },
            label: String::new(),
        }
    }

    #[test]
    fn repetitions_are_deterministic_and_distinct() {
        let s = spec(0.62, 1e-4, 2);
        let a = simulate_repetition(&s, ModeKind::QuasiAlpha, 0).unwrap();
        let b = simulate_repetition(&s, ModeKind::QuasiAlpha, 0).unwrap();
        let c = simulate_repetition(&s, ModeKind::QuasiAlpha, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.v1(), c.v1());
        assert_eq!(a.n_samples(), 16_000);
    }

    #[test]
    fn short_records_rejected() {
        let mut s = spec(0.62, 1e-4, 2);
        s.acquisition.duration_s = 0.2;
        assert!(matches!(s.validate(), Err(PipelineError::InvalidSettings(_))));
        let mut s = spec(0.62, 1e-4, 2);
        s.acquisition.sample_rate_hz = 20_000.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn noise_free_r_factors_follow_correlation_algebra() {
        let s = spec(0.62, 0.0, 2);
        let p = s.params;
        let m = s.mixing;
        let [ea, eb] = eigenmodes(&p).unwrap();
        let (ga, gb) = (ea.ellipticity(), eb.ellipticity());
        let det = m.a * m.d - m.b * m.c;
        let ra = ga * det / (m.a * m.a + m.b * m.b * ga * ga);
        let rb = gb * det / (m.d * m.d + m.c * m.c * gb * gb);
        let ta = analyze_trace(&simulate_repetition(&s, ModeKind::QuasiAlpha, 0).unwrap(), AnalysisOptions::default()).unwrap();
        let tb = analyze_trace(&simulate_repetition(&s, ModeKind::QuasiBeta, 0).unwrap(), AnalysisOptions::default()).unwrap();
        assert!((ta.r / ra - 1.0).abs() < 0.01, "{} vs {}", ta.r, ra);
        assert!((tb.r / rb - 1.0).abs() < 0.01, "{} vs {}", tb.r, rb);
        // Fitted frequencies sit on the normal modes.
        assert!((ta.auto_fit.omega / ea.omega - 1.0).abs() < 1e-4);
        assert!((tb.auto_fit.omega / eb.omega - 1.0).abs() < 1e-4);
        // Autocorrelations carry no out-of-phase part.
        assert!(ta.auto.s.abs() <= 3.0 * ta.auto.sigma_s + 1e-12 * ta.auto.c);
        assert!(tb.auto.s.abs() <= 3.0 * tb.auto.sigma_s + 1e-12 * tb.auto.c);
    }

    #[test]
    fn dataset_recovers_injected_frequency() {
        let s = spec(0.62, 1e-4, 16);
        let d = simulate_dataset(&s).unwrap();
        let a = analyze_dataset(&d.alpha, &d.beta, s.params.omega_alpha, s.params.omega_beta, None, AnalysisOptions::default())
            .unwrap();
        let f = a.result.f_i;
        assert!((f.value() - 0.62).abs() < 3.0 * f.sigma(), "{f}");
        assert_eq!(a.result.n_repetitions_alpha, 16);
        let again = analyze_dataset(&d.alpha, &d.beta, s.params.omega_alpha, s.params.omega_beta, None, AnalysisOptions::default())
            .unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn missing_class_and_failures_reported() {
        let s = spec(0.62, 1e-4, 2);
        let d = simulate_dataset(&s).unwrap();
        let e = analyze_dataset(&d.alpha, &[], 1.0, 2.0, None, AnalysisOptions::default()).unwrap_err();
        assert!(matches!(e, PipelineError::MissingMode(ModeKind::QuasiBeta)));
        // A silent main channel carries no excitation.
        let noise: Vec<TimeTraceSet> = (0..4)
            .map(|i| {
                let mut v1 = vec![0.0; 12_500];
                let mut v2 = vec![0.0; 12_500];
                add_measurement_noise(&mut v1, &mut v2, 1e-3, i).unwrap();
                TimeTraceSet::new(4e-5, vec![0.0; 12_500], v2, d.alpha[0].meta().clone()).unwrap()
            })
            .collect();
        let e = analyze_dataset(&noise, &d.beta, 1.0, 2.0, None, AnalysisOptions::default()).unwrap_err();
        assert!(matches!(e, PipelineError::TooManyFailures { .. }), "{e}");
    }
}

//! Detector channels: crosstalk mixing, white measurement noise and the
//! on-disk trace format.

mod io;

pub use io::{read_trace, write_trace, TRACE_FORMAT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dynamics::{ModeKind, Trajectory};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Channel gains in V/rad: `V1 = Aα + Bβ`, `V2 = Cα + Dβ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MixingMatrix {
    /// Crosstalk ratios above this are accepted with a warning.
    pub const SELECTIVITY_ADVISORY: f64 = 0.1;

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, SignalError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(SignalError::InvalidMixing("gains must be finite".into()));
        }
        if a == 0.0 || d == 0.0 {
            return Err(SignalError::InvalidMixing(format!("diagonal gains must be nonzero (A = {a}, D = {d})")));
        }
        let m = Self { a, b, c, d };
        if m.crosstalk() > Self::SELECTIVITY_ADVISORY {
            log::warn!(
                "channel crosstalk |B/A| = {:.3}, |C/D| = {:.3} exceeds {}",
                (b / a).abs(),
                (c / d).abs(),
                Self::SELECTIVITY_ADVISORY
            );
        }
        Ok(m)
    }

    /// Perfectly selective unit-gain channels.
    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Largest of |B/A| and |C/D|.
    pub fn crosstalk(&self) -> f64 {
        (self.b / self.a).abs().max((self.c / self.d).abs())
    }

    #[inline]
    pub fn apply(&self, alpha: f64, beta: f64) -> (f64, f64) {
        (self.a * alpha + self.b * beta, self.c * alpha + self.d * beta)
    }
}

/// Labels stored alongside a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub mode_excited: ModeKind,
    /// Hz
    pub f_alpha: f64,
    /// Hz
    pub f_beta: f64,
    pub seed: u64,
    pub label: String,
}

/// Two simultaneously sampled detector channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTraceSet {
    dt: f64,
    v1: Vec<f64>,
    v2: Vec<f64>,
    meta: TraceMeta,
}

/// Minimum number of periods of the excited mode a trace must span.
pub const MIN_PERIODS: f64 = 25.0;

impl TimeTraceSet {
    pub fn new(dt: f64, v1: Vec<f64>, v2: Vec<f64>, meta: TraceMeta) -> Result<Self, SignalError> {
        let bad = |m: String| Err(SignalError::InvalidTrace(m));
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("dt must be positive, got {dt}"));
        }
        if v1.len() != v2.len() {
            return bad(format!("channel lengths differ ({} vs {})", v1.len(), v2.len()));
        }
        if v1.len() < 2 {
            return bad(format!("need at least 2 samples, got {}", v1.len()));
        }
        if let Some(i) = v1.iter().chain(&v2).position(|v| !v.is_finite()) {
            return bad(format!("non-finite sample at index {}", i % v1.len()));
        }
        if !(meta.f_alpha > 0.0 && meta.f_beta > 0.0 && meta.f_alpha.is_finite() && meta.f_beta.is_finite()) {
            return bad(format!("mode frequencies must be positive ({}, {})", meta.f_alpha, meta.f_beta));
        }
        let f = match meta.mode_excited {
            ModeKind::QuasiAlpha => meta.f_alpha,
            ModeKind::QuasiBeta => meta.f_beta,
        };
        let periods = v1.len() as f64 * dt * f;
        if periods < MIN_PERIODS {
            return bad(format!(
                "trace spans {periods:.1} periods of the {} mode, need at least {MIN_PERIODS}",
                meta.mode_excited
            ));
        }
        Ok(Self { dt, v1, v2, meta })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_samples(&self) -> usize {
        self.v1.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.v1.len() as f64
    }

    pub fn v1(&self) -> &[f64] {
        &self.v1
    }

    pub fn v2(&self) -> &[f64] {
        &self.v2
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }
}

/// Per-sample linear map of a trajectory onto the two channels.
pub fn mix_channels(traj: &Trajectory, mixing: &MixingMatrix) -> (Vec<f64>, Vec<f64>) {
    traj.states.iter().map(|s| mixing.apply(s.alpha, s.beta)).unzip()
}

/// Adds independent white Gaussian noise of standard deviation `noise_rms`
/// to each channel. Channel 1 and channel 2 draw from separate streams of
/// the same seed.
pub fn add_measurement_noise(
    v1: &mut [f64],
    v2: &mut [f64],
    noise_rms: f64,
    seed: u64,
) -> Result<(), SignalError> {
    if !(noise_rms >= 0.0 && noise_rms.is_finite()) {
        return Err(SignalError::InvalidTrace(format!("noise rms must be non-negative, got {noise_rms}")));
    }
    if noise_rms == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, noise_rms).expect("validated sigma");
    for (stream, channel) in [v1, v2].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        for v in channel.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LibrationState;

    fn traj(f: impl Fn(usize) -> (f64, f64), n: usize) -> Trajectory {
        Trajectory {
            dt: 1e-3,
            states: (0..n)
                .map(|k| {
                    let (a, b) = f(k);
                    LibrationState::new(a, b, 0.0, 0.0)
                })
                .collect(),
        }
    }

    fn meta() -> TraceMeta {
        TraceMeta {
            mode_excited: ModeKind::QuasiAlpha,
            f_alpha: 100.0,
            f_beta: 400.0,
            seed: 1,
            label: "t".into(),
        }
    }

    #[test]
    fn perfect_selectivity() {
        let t = traj(|k| ((k as f64).sin(), (k as f64 * 0.3).cos()), 100);
        let m = MixingMatrix::new(2.0, 0.0, 0.0, -3.0).unwrap();
        let (v1, v2) = mix_channels(&t, &m);
        for (k, s) in t.states.iter().enumerate() {
            assert_eq!(v1[k], 2.0 * s.alpha);
            assert_eq!(v2[k], -3.0 * s.beta);
        }
    }

    #[test]
    fn equal_waveforms_give_gain_ratio() {
        let t = traj(|k| ((k as f64 * 0.1).sin() + 2.0, (k as f64 * 0.1).sin() + 2.0), 100);
        let m = MixingMatrix::new(1.0, 0.05, -0.03, 0.9).unwrap();
        let (v1, v2) = mix_channels(&t, &m);
        for k in 0..100 {
            assert!((v1[k] / v2[k] - 1.05 / 0.87).abs() < 1e-14);
        }
    }

    #[test]
    fn mixing_is_linear() {
        let m = MixingMatrix::new(1.0, 0.05, -0.03, 0.9).unwrap();
        let t1 = traj(|k| ((k as f64).sin(), (k as f64).cos()), 64);
        let t2 = traj(|k| ((k as f64 * 0.7).cos(), (k as f64 * 1.3).sin()), 64);
        let sum = traj(|k| (t1.states[k].alpha + t2.states[k].alpha, t1.states[k].beta + t2.states[k].beta), 64);
        let (a1, a2) = mix_channels(&t1, &m);
        let (b1, b2) = mix_channels(&t2, &m);
        let (s1, s2) = mix_channels(&sum, &m);
        for k in 0..64 {
            assert!((s1[k] - (a1[k] + b1[k])).abs() <= 1e-15 * s1[k].abs().max(1.0));
            assert!((s2[k] - (a2[k] + b2[k])).abs() <= 1e-15 * s2[k].abs().max(1.0));
        }
    }

    #[test]
    fn zero_diagonal_rejected() {
        assert!(MixingMatrix::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(MixingMatrix::new(1.0, 0.5, 0.0, 1.0).is_ok());
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let n = 100_000;
        let clean: Vec<f64> = (0..n).map(|k| (k as f64 * 0.01).sin()).collect();
        let (mut a1, mut a2) = (clean.clone(), clean.clone());
        add_measurement_noise(&mut a1, &mut a2, 1e-3, 5).unwrap();
        for ch in [&a1, &a2] {
            let var = ch.iter().zip(&clean).map(|(x, c)| (x - c).powi(2)).sum::<f64>() / n as f64;
            assert!((var / 1e-6 - 1.0).abs() < 0.05, "{var}");
        }
        assert_ne!(a1, a2);
        let (mut b1, mut b2) = (clean.clone(), clean.clone());
        add_measurement_noise(&mut b1, &mut b2, 1e-3, 5).unwrap();
        assert_eq!(a1, b1);
        let (mut c1, mut c2) = (clean.clone(), clean.clone());
        add_measurement_noise(&mut c1, &mut c2, 1e-3, 6).unwrap();
        assert_ne!(a1, c1);
        let (mut z1, mut z2) = (clean.clone(), clean.clone());
        add_measurement_noise(&mut z1, &mut z2, 0.0, 6).unwrap();
        assert_eq!(z1, clean);
        assert!(add_measurement_noise(&mut z1, &mut z2, -1.0, 6).is_err());
    }

    #[test]
    fn trace_invariants() {
        let v = vec![0.0; 250];
        assert!(TimeTraceSet::new(1e-3, v.clone(), v.clone(), meta()).is_ok());
        assert!(TimeTraceSet::new(1e-3, v[..249].to_vec(), v.clone(), meta()).is_err());
        assert!(TimeTraceSet::new(0.0, v.clone(), v.clone(), meta()).is_err());
        assert!(TimeTraceSet::new(1e-3, v[..200].to_vec(), v[..200].to_vec(), meta()).is_err());
        assert!(TimeTraceSet::new(1e-3, vec![0.0], vec![0.0], meta()).is_err());
        let mut bad = v.clone();
        bad[3] = f64::NAN;
        assert!(TimeTraceSet::new(1e-3, bad, v, meta()).is_err());
    }
}

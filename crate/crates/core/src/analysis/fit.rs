use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AnalysisError, CorrelationSeries};

/// Lag range used by the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// Every lag of the series.
    Full,
    /// `|τ| ≤ n·2π/ω_guess`.
    Periods(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub window: FitWindow,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: FitWindow::Full,
            max_iterations: 200,
        }
    }
}

/// Least-squares fit of `A0 (1 − A1|τ|) cos(ωτ + φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFit {
    pub a0: f64,
    /// 1/s
    pub a1: f64,
    /// rad/s
    pub omega: f64,
    /// rad, in (−π, π]
    pub phi: f64,
    /// Parameter order (A0, A1, ω, φ).
    pub covariance: Matrix4<f64>,
    pub residual_rms: f64,
    pub n_points: usize,
    pub iterations: usize,
    /// A0 is within 2σ of zero.
    pub low_signal: bool,
}

impl CorrelationFit {
    pub fn sigma_a0(&self) -> f64 {
        self.covariance[(0, 0)].sqrt()
    }

    pub fn sigma_a1(&self) -> f64 {
        self.covariance[(1, 1)].sqrt()
    }

    pub fn sigma_omega(&self) -> f64 {
        self.covariance[(2, 2)].sqrt()
    }

    pub fn sigma_phi(&self) -> f64 {
        self.covariance[(3, 3)].sqrt()
    }

    pub fn params(&self) -> [f64; 4] {
        [self.a0, self.a1, self.omega, self.phi]
    }

    pub fn evaluate(&self, tau: f64) -> f64 {
        model(&Vector4::new(self.a0, self.a1, self.omega, self.phi), tau)
    }
}

/// In-phase and out-of-phase parts of a fitted correlation:
/// `c = A0 cos φ`, `s = −A0 sin φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseComponents {
    pub c: f64,
    pub s: f64,
    pub sigma_c: f64,
    pub sigma_s: f64,
}

pub fn phase_components(fit: &CorrelationFit) -> PhaseComponents {
    let (sp, cp) = fit.phi.sin_cos();
    let a0 = fit.a0;
    let cov = Matrix2::new(
        fit.covariance[(0, 0)],
        fit.covariance[(0, 3)],
        fit.covariance[(3, 0)],
        fit.covariance[(3, 3)],
    );
    let gc = Vector2::new(cp, -a0 * sp);
    let gs = Vector2::new(-sp, -a0 * cp);
    PhaseComponents {
        c: a0 * cp,
        s: -a0 * sp,
        sigma_c: gc.dot(&(cov * gc)).max(0.0).sqrt(),
        sigma_s: gs.dot(&(cov * gs)).max(0.0).sqrt(),
    }
}

#[inline]
fn model(p: &Vector4<f64>, tau: f64) -> f64 {
    p[0] * (1.0 - p[1] * tau.abs()) * (p[2] * tau + p[3]).cos()
}

#[inline]
fn gradient(p: &Vector4<f64>, tau: f64) -> Vector4<f64> {
    let env = 1.0 - p[1] * tau.abs();
    let (s, c) = (p[2] * tau + p[3]).sin_cos();
    Vector4::new(env * c, -p[0] * tau.abs() * c, -p[0] * env * tau * s, -p[0] * env * s)
}

fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Peak of the zero-padded spectrum of `y` within ±20 % of `guess`,
/// refined by golden-section search on the continuous DFT magnitude.
fn initial_frequency(tau: &[f64], y: &[f64], dt: f64, guess: f64) -> f64 {
    let size = (4 * y.len()).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, v) in buf.iter_mut().zip(y) {
        b.re = *v;
    }
    FftPlanner::<f64>::new().plan_fft_forward(size).process(&mut buf);
    let bin_w = 2.0 * PI / (size as f64 * dt);
    let lo = ((0.8 * guess / bin_w).floor() as usize).max(1);
    let hi = ((1.2 * guess / bin_w).ceil() as usize).min(size / 2).max(lo);
    let peak = (lo..=hi).max_by(|&i, &j| buf[i].norm_sqr().total_cmp(&buf[j].norm_sqr())).unwrap_or(lo);

    let power = |w: f64| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, v) in tau.iter().zip(y) {
            acc += Complex64::from_polar(*v, -w * t);
        }
        acc.norm_sqr()
    };
    let (mut a, mut b) = ((peak as f64 - 1.0) * bin_w, (peak as f64 + 1.0) * bin_w);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (power(x1), power(x2));
    for _ in 0..60 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = power(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = power(x2);
        }
        if b - a < 1e-12 * guess {
            break;
        }
    }
    0.5 * (a + b)
}

pub fn fit_correlation(series: &CorrelationSeries, freq_guess: f64) -> Result<CorrelationFit, AnalysisError> {
    fit_correlation_with(series, freq_guess, FitOptions::default())
}

/// Levenberg–Marquardt fit with Marquardt diagonal scaling.
///
/// Initialization: ω from the spectral peak near `freq_guess`, A1 from the
/// trace length (`1/(N·dt)`), then A0 and φ from a linear least-squares
/// solve for the cosine and sine amplitudes at fixed ω and A1.
pub fn fit_correlation_with(
    series: &CorrelationSeries,
    freq_guess: f64,
    opts: FitOptions,
) -> Result<CorrelationFit, AnalysisError> {
    if !(freq_guess > 0.0 && freq_guess.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!("frequency guess must be positive, got {freq_guess}")));
    }
    let dt = series.dt();
    let full = series.max_lag();
    let kmax = match opts.window {
        FitWindow::Full => full,
        FitWindow::Periods(n) => {
            if !(n > 0.0) {
                return Err(AnalysisError::InvalidArgument(format!("window must be positive, got {n} periods")));
            }
            ((n * 2.0 * PI / freq_guess / dt).ceil() as usize).min(full)
        }
    };
    let start = full - kmax;
    let y = &series.values()[start..start + 2 * kmax + 1];
    let tau: Vec<f64> = (-(kmax as i64)..=kmax as i64).map(|k| k as f64 * dt).collect();
    let n = y.len();
    if n <= 4 {
        return Err(AnalysisError::InvalidArgument(format!("need more than 4 lags to fit, got {n}")));
    }
    let periods = tau[n - 1] * freq_guess / (2.0 * PI);
    if periods < 2.0 {
        log::warn!("fit window spans only {periods:.1} periods");
    }

    // Starting point.
    let omega0 = initial_frequency(&tau, y, dt, freq_guess);
    let a1_0 = 1.0 / (series.n_samples() as f64 * dt);
    let mut m = Matrix2::zeros();
    let mut v = Vector2::zeros();
    for (t, yy) in tau.iter().zip(y) {
        let env = 1.0 - a1_0 * t.abs();
        let (s, c) = (omega0 * t).sin_cos();
        let b = Vector2::new(env * c, env * s);
        m += b * b.transpose();
        v += b * *yy;
    }
    let (pc, ps) = match m.lu().solve(&v) {
        Some(x) => (x[0], x[1]),
        None => return Err(AnalysisError::IllConditioned("degenerate initial basis".into())),
    };
    let mut p = Vector4::new(pc.hypot(ps), a1_0, omega0, (-ps).atan2(pc));
    if p[0] == 0.0 {
        p[0] = y.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    }

    let cost = |p: &Vector4<f64>| -> f64 { tau.iter().zip(y).map(|(t, yy)| (yy - model(p, *t)).powi(2)).sum() };
    let normal = |p: &Vector4<f64>| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (t, yy) in tau.iter().zip(y) {
            let g = gradient(p, *t);
            jtj += g * g.transpose();
            jtr += g * (yy - model(p, *t));
        }
        (jtj, jtr)
    };

    let mut current = cost(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (jtj, jtr) = normal(&p);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let c = cost(&trial);
            if c.is_finite() && c <= current {
                let scale = [p[0].abs(), p[1].abs() + a1_0, p[2].abs(), 1.0];
                let small = (0..4).all(|i| delta[i].abs() <= 1e-13 * scale[i]);
                let stalled = current - c <= 1e-15 * current;
                p = trial;
                current = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                converged = small || stalled;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: p is a minimum to machine precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let residual_rms = (current / n as f64).sqrt();
    if !converged {
        return Err(AnalysisError::NoConvergence { iterations, residual_rms });
    }

    let (jtj, _) = normal(&p);
    let s2 = current / (n - 4) as f64;
    let mut covariance = jtj
        .try_inverse()
        .ok_or_else(|| AnalysisError::IllConditioned("singular normal matrix at the optimum".into()))?
        * s2;
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += PI;
        for i in 1..4 {
            covariance[(0, i)] = -covariance[(0, i)];
            covariance[(i, 0)] = -covariance[(i, 0)];
        }
    }
    p[3] = wrap_phase(p[3]);
    if 1.0 - p[1] * tau[n - 1] < 0.0 {
        log::warn!("fitted envelope turns negative inside the fit window (A1 = {:e} 1/s)", p[1]);
    }
    let low_signal = p[0] < 2.0 * covariance[(0, 0)].max(0.0).sqrt();
    Ok(CorrelationFit {
        a0: p[0],
        a1: p[1],
        omega: p[2],
        phi: p[3],
        covariance,
        residual_rms,
        n_points: n,
        iterations,
        low_signal,
    })
}

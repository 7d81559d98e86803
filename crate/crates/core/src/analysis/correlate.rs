use std::cmp::Ordering;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::AnalysisError;

/// `C_ij(k·dt)` for `k = −L..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    dt: f64,
    max_lag: usize,
    /// Length of the traces the series was computed from.
    n_samples: usize,
    values: Vec<f64>,
}

impl CorrelationSeries {
    pub fn new(dt: f64, max_lag: usize, n_samples: usize, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(AnalysisError::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if values.len() != 2 * max_lag + 1 {
            return Err(AnalysisError::InvalidArgument(format!(
                "expected {} values for max lag {max_lag}, got {}",
                2 * max_lag + 1,
                values.len()
            )));
        }
        Ok(Self {
            dt,
            max_lag,
            n_samples,
            values,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lag times in seconds, aligned with [`CorrelationSeries::values`].
    pub fn lags(&self) -> Vec<f64> {
        let l = self.max_lag as i64;
        (-l..=l).map(|k| k as f64 * self.dt).collect()
    }

    /// Value at integer lag `k`, `|k| ≤ max_lag`.
    pub fn at(&self, k: i64) -> f64 {
        self.values[(k + self.max_lag as i64) as usize]
    }
}

fn check(vi: &[f64], vj: &[f64], max_lag: usize) -> Result<(), AnalysisError> {
    if vi.len() != vj.len() {
        return Err(AnalysisError::InvalidArgument(format!(
            "trace lengths differ ({} vs {})",
            vi.len(),
            vj.len()
        )));
    }
    if max_lag >= vi.len() {
        return Err(AnalysisError::InvalidArgument(format!(
            "max lag {max_lag} must be below the trace length {}",
            vi.len()
        )));
    }
    Ok(())
}

/// Canonical ordering of the pair so that `C_ij(k)` and `C_ji(−k)` are
/// produced by the same arithmetic and agree bit for bit.
fn swapped(vi: &[f64], vj: &[f64]) -> bool {
    vi.iter()
        .zip(vj)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| *o != Ordering::Equal)
        == Some(Ordering::Greater)
}

fn oriented(vi: &[f64], vj: &[f64], max_lag: usize, kernel: fn(&[f64], &[f64], usize) -> Vec<f64>) -> Vec<f64> {
    if swapped(vi, vj) {
        let mut v = kernel(vj, vi, max_lag);
        v.reverse();
        v
    } else {
        kernel(vi, vj, max_lag)
    }
}

fn direct_kernel(vi: &[f64], vj: &[f64], max_lag: usize) -> Vec<f64> {
    let n = vi.len() as i64;
    let l = max_lag as i64;
    (-l..=l)
        .map(|k| {
            let lo = 0.max(-k);
            let hi = n.min(n - k);
            (lo..hi).map(|m| vi[(m + k) as usize] * vj[m as usize]).sum()
        })
        .collect()
}

fn fft_kernel(vi: &[f64], vj: &[f64], max_lag: usize) -> Vec<f64> {
    let n = vi.len();
    let size = (n + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut b = vec![Complex64::new(0.0, 0.0); size];
        for (d, s) in b.iter_mut().zip(v) {
            d.re = *s;
        }
        b
    };
    let (mut x, mut y) = (pad(vi), pad(vj));
    fwd.process(&mut x);
    fwd.process(&mut y);
    for (a, b) in x.iter_mut().zip(&y) {
        *a *= b.conj();
    }
    inv.process(&mut x);
    let scale = 1.0 / size as f64;
    let l = max_lag as i64;
    (-l..=l)
        .map(|k| x[k.rem_euclid(size as i64) as usize].re * scale)
        .collect()
}

/// Reference implementation summing `Σ vi[n+k]·vj[n]` term by term.
pub fn correlate_direct(
    vi: &[f64],
    vj: &[f64],
    dt: f64,
    max_lag: usize,
) -> Result<CorrelationSeries, AnalysisError> {
    check(vi, vj, max_lag)?;
    CorrelationSeries::new(dt, max_lag, vi.len(), oriented(vi, vj, max_lag, direct_kernel))
}

/// Unnormalized discrete correlation `C_ij(k) = Σ_n vi[n+k]·vj[n]` over
/// the `N − |k|` overlapping samples. Large inputs go through a
/// zero-padded FFT.
pub fn correlate(vi: &[f64], vj: &[f64], dt: f64, max_lag: usize) -> Result<CorrelationSeries, AnalysisError> {
    check(vi, vj, max_lag)?;
    let work = vi.len() as f64 * (2 * max_lag + 1) as f64;
    let kernel: fn(&[f64], &[f64], usize) -> Vec<f64> = if work > 2.0e5 { fft_kernel } else { direct_kernel };
    CorrelationSeries::new(dt, max_lag, vi.len(), oriented(vi, vj, max_lag, kernel))
}

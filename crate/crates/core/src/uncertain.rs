//! Values with a one-standard-deviation uncertainty and the two propagation
//! routes used across the crate: first-order (linearized) and Monte Carlo.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertainError {
    #[error("uncertainty must be finite and non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("value must be finite, got {0}")]
    NonFinite(f64),
    #[error("model is not finite at the input point (inputs {inputs:?})")]
    InvalidModelPoint { inputs: Vec<f64> },
    #[error("Monte Carlo propagation produced only {ok} valid samples out of {total}")]
    TooFewSamples { ok: usize, total: usize },
}

/// A real value with its standard deviation in the same units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertain {
    value: f64,
    sigma: f64,
}

impl Uncertain {
    pub fn new(value: f64, sigma: f64) -> Result<Self, UncertainError> {
        if !value.is_finite() {
            return Err(UncertainError::NonFinite(value));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(UncertainError::NegativeSigma(sigma));
        }
        Ok(Self { value, sigma })
    }

    /// A value carrying zero uncertainty.
    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    /// `value ± rel·|value|`.
    pub fn with_relative(value: f64, rel: f64) -> Result<Self, UncertainError> {
        Self::new(value, rel * value.abs())
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// σ/|value|; infinite for a zero value with non-zero sigma.
    pub fn relative(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            self.sigma / self.value.abs()
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            sigma: self.sigma * k.abs(),
        }
    }

    /// Number of standard deviations separating `self` from `other`, using
    /// the quadrature sum of both uncertainties.
    pub fn pull(&self, other: &Uncertain) -> f64 {
        let s = self.sigma.hypot(other.sigma);
        let d = (self.value - other.value).abs();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.value.powf(p);
        Self {
            value: v,
            sigma: (p * self.value.powf(p - 1.0) * self.sigma).abs(),
        }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }
}

impl fmt::Display for Uncertain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = f.precision() {
            write!(f, "{:.*e} ± {:.*e}", p, self.value, p, self.sigma)
        } else {
            write!(f, "{:e} ± {:e}", self.value, self.sigma)
        }
    }
}

impl Add for Uncertain {
    type Output = Uncertain;
    fn add(self, rhs: Uncertain) -> Uncertain {
        Uncertain {
            value: self.value + rhs.value,
            sigma: self.sigma.hypot(rhs.sigma),
        }
    }
}

impl Sub for Uncertain {
    type Output = Uncertain;
    fn sub(self, rhs: Uncertain) -> Uncertain {
        Uncertain {
            value: self.value - rhs.value,
            sigma: self.sigma.hypot(rhs.sigma),
        }
    }
}

impl Mul for Uncertain {
    type Output = Uncertain;
    fn mul(self, rhs: Uncertain) -> Uncertain {
        Uncertain {
            value: self.value * rhs.value,
            sigma: (rhs.value * self.sigma).hypot(self.value * rhs.sigma),
        }
    }
}

impl Div for Uncertain {
    type Output = Uncertain;
    fn div(self, rhs: Uncertain) -> Uncertain {
        let v = self.value / rhs.value;
        Uncertain {
            value: v,
            sigma: (self.sigma / rhs.value).hypot(v * rhs.sigma / rhs.value),
        }
    }
}

impl Neg for Uncertain {
    type Output = Uncertain;
    fn neg(self) -> Uncertain {
        Uncertain {
            value: -self.value,
            sigma: self.sigma,
        }
    }
}

/// Central-difference step for input `x` with uncertainty `sigma`.
///
/// Scales with the magnitude of the input so SI quantities of any size
/// (micrometre radii, kA/m magnetizations) get the same relative resolution.
fn diff_step(x: f64, sigma: f64) -> f64 {
    let scale = x.abs().max(sigma);
    if scale > 0.0 {
        1e-6 * scale
    } else {
        1e-6
    }
}

/// First-order propagation: `value = f(x)`, `sigma² = Σ (∂f/∂xᵢ · σᵢ)²`
/// with central-difference partial derivatives.
pub fn combine<F>(f: F, inputs: &[Uncertain]) -> Result<Uncertain, UncertainError>
where
    F: Fn(&[f64]) -> f64,
{
    let x: Vec<f64> = inputs.iter().map(|u| u.value).collect();
    let value = f(&x);
    if !value.is_finite() {
        return Err(UncertainError::InvalidModelPoint { inputs: x });
    }
    let mut var = 0.0;
    let mut probe = x.clone();
    for (i, u) in inputs.iter().enumerate() {
        if u.sigma == 0.0 {
            continue;
        }
        let h = diff_step(x[i], u.sigma);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(UncertainError::InvalidModelPoint { inputs: x });
        }
        let d = (fp - fm) / (2.0 * h);
        var += (d * u.sigma).powi(2);
    }
    Ok(Uncertain {
        value,
        sigma: var.sqrt(),
    })
}

/// Result of a Monte Carlo propagation over a vector-valued model.
#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub means: Vec<f64>,
    /// Sample standard deviation of each output.
    pub sigmas: Vec<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Monte Carlo propagation with independent Gaussian draws per input.
///
/// Each sample uses its own ChaCha stream keyed by `(seed, index)` and the
/// outputs are reduced in index order, so the summary is bit-identical for a
/// fixed seed regardless of the thread count. Samples where `f` returns
/// `None` are dropped and counted; fewer than 90% valid samples is an error.
pub fn monte_carlo<F>(
    f: F,
    inputs: &[Uncertain],
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary, UncertainError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let outputs: Vec<Option<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let x: Vec<f64> = inputs
                .iter()
                .map(|u| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    u.value + u.sigma * z
                })
                .collect();
            f(&x).filter(|v| v.iter().all(|y| y.is_finite()))
        })
        .collect();

    let ok: Vec<&Vec<f64>> = outputs.iter().flatten().collect();
    let n_ok = ok.len();
    if n_ok < 2 || (n_ok as f64) < 0.9 * n_samples as f64 {
        return Err(UncertainError::TooFewSamples {
            ok: n_ok,
            total: n_samples,
        });
    }
    let dim = ok[0].len();
    let mut means = vec![0.0; dim];
    for v in &ok {
        for (m, y) in means.iter_mut().zip(v.iter()) {
            *m += y;
        }
    }
    means.iter_mut().for_each(|m| *m /= n_ok as f64);
    let mut sigmas = vec![0.0; dim];
    for v in &ok {
        for ((s, y), m) in sigmas.iter_mut().zip(v.iter()).zip(means.iter()) {
            *s += (y - m).powi(2);
        }
    }
    sigmas
        .iter_mut()
        .for_each(|s| *s = (*s / (n_ok as f64 - 1.0)).sqrt());
    Ok(MonteCarloSummary {
        means,
        sigmas,
        n_ok,
        n_failed: n_samples - n_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_keeps_sigma() {
        let x = Uncertain::new(3.0, 0.1).unwrap();
        let y = combine(|v| v[0], &[x]).unwrap();
        assert_relative_eq!(y.value(), 3.0);
        assert_relative_eq!(y.sigma(), 0.1, max_relative = 1e-9);
    }

    #[test]
    fn sum_adds_in_quadrature() {
        let a = Uncertain::new(1.0, 0.3).unwrap();
        let b = Uncertain::new(2.0, 0.4).unwrap();
        let y = combine(|v| v[0] + v[1], &[a, b]).unwrap();
        assert_relative_eq!(y.value(), 3.0);
        assert_relative_eq!(y.sigma(), 0.5, max_relative = 1e-9);
        let z = a + b;
        assert_relative_eq!(z.sigma(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn product_matches_monte_carlo_oracle() {
        // Oracle: direct sampling of x·y, independent of the derivative path.
        let a = Uncertain::new(2.0, 0.02).unwrap();
        let b = Uncertain::new(5.0, 0.05).unwrap();
        let lin = combine(|v| v[0] * v[1], &[a, b]).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let za: f64 = StandardNormal.sample(&mut rng);
                let zb: f64 = StandardNormal.sample(&mut rng);
                (2.0 + 0.02 * za) * (5.0 + 0.05 * zb)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();

        assert_relative_eq!(lin.value(), 10.0);
        assert!((lin.sigma() - sd).abs() / sd < 0.05, "lin {} mc {}", lin.sigma(), sd);

        let mc = monte_carlo(|v| Some(vec![v[0] * v[1]]), &[a, b], 100_000, 5).unwrap();
        assert!((mc.sigmas[0] - sd).abs() / sd < 0.05);
    }

    #[test]
    fn non_finite_model_is_rejected() {
        let a = Uncertain::new(0.0, 0.1).unwrap();
        assert!(matches!(
            combine(|v| 1.0 / v[0], &[a]),
            Err(UncertainError::InvalidModelPoint { .. })
        ));
    }

    #[test]
    fn negative_sigma_is_rejected() {
        assert!(Uncertain::new(1.0, -1e-3).is_err());
        assert!(Uncertain::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let a = Uncertain::new(1.0, 0.2).unwrap();
        let f = |v: &[f64]| Some(vec![v[0].exp()]);
        let m1 = monte_carlo(f, &[a], 2000, 11).unwrap();
        let m2 = monte_carlo(f, &[a], 2000, 11).unwrap();
        assert_eq!(m1.means, m2.means);
        assert_eq!(m1.sigmas, m2.sigmas);
    }

    proptest! {
        #[test]
        fn linear_propagation_is_exact(
            c in proptest::collection::vec(-10.0f64..10.0, 1..6),
            s in proptest::collection::vec(0.0f64..2.0, 6),
            x in proptest::collection::vec(-100.0f64..100.0, 6),
        ) {
            let inputs: Vec<Uncertain> = c.iter().enumerate()
                .map(|(i, _)| Uncertain::new(x[i], s[i]).unwrap())
                .collect();
            let coeffs = c.clone();
            let y = combine(move |v| v.iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum(), &inputs).unwrap();
            let expect = c.iter().enumerate().map(|(i, ci)| (ci * s[i]).powi(2)).sum::<f64>().sqrt();
            prop_assert!((y.sigma() - expect).abs() <= 1e-8 * (1.0 + expect));
        }
    }
}

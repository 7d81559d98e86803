use super::AnalysisError;
use crate::Uncertain;

/// Mean and standard error of the mean.
pub fn aggregate_repetitions(values: &[f64]) -> Result<Uncertain, AnalysisError> {
    let n = values.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientData(n));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidArgument("non-finite repetition value".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Uncertain::new(mean, (var / n as f64).sqrt())?)
}

/// Equal-width histogram; `edges.len() == counts.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `lo,hi,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.10e},{:.10e},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, AnalysisError> {
    if bins == 0 || values.is_empty() {
        return Err(AnalysisError::InvalidArgument("histogram needs values and at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidArgument("non-finite histogram value".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn small_cases() {
        let u = aggregate_repetitions(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((u.value(), u.sigma()), (1.0, 0.0));
        let u = aggregate_repetitions(&[0.0, 2.0]).unwrap();
        assert_eq!((u.value(), u.sigma()), (1.0, 1.0));
        assert!(matches!(aggregate_repetitions(&[1.0]), Err(AnalysisError::InsufficientData(1))));
    }

    #[test]
    fn sem_of_128_repetitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Normal::new(4e-4, 3e-5).unwrap();
        let v: Vec<f64> = (0..128).map(|_| d.sample(&mut rng)).collect();
        let u = aggregate_repetitions(&v).unwrap();
        let mean = v.iter().sum::<f64>() / 128.0;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 127.0).sqrt();
        assert!((u.sigma() - sd / 128f64.sqrt()).abs() < 1e-18);
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram(&v, 20).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 1000);
        assert_eq!(h.edges.len(), 21);
        assert_eq!(h.to_csv().lines().count(), 21);
        let flat = histogram(&[2.0, 2.0], 4).unwrap();
        assert_eq!(flat.counts.iter().sum::<usize>(), 2);
        assert!(histogram(&[], 4).is_err());
    }
}

//! Measurement chain: discrete correlations, envelope-cosine fits,
//! in/out-of-phase decomposition and the calibration-free extraction of
//! the Einstein–de Haas frequency.

mod correlate;
mod fit;
mod inference;
mod stats;

pub use correlate::{correlate, correlate_direct, CorrelationSeries};
pub use fit::{
    fit_correlation, fit_correlation_with, phase_components, CorrelationFit, FitOptions, FitWindow,
    PhaseComponents,
};
pub use inference::{
    g_eff_reference, g_factor, g_factor_from_magnet, omega_i_from_r, r_factor, InferenceResult,
};
pub use stats::{aggregate_repetitions, histogram, Histogram};

use thiserror::Error;

use crate::uncertain::UncertainError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fit did not converge after {iterations} iterations (residual rms {residual_rms:e})")]
    NoConvergence { iterations: usize, residual_rms: f64 },
    #[error("fit is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("excited mode absent from its main channel (in-phase autocorrelation component {0:e})")]
    NoExcitation(f64),
    #[error("r_α·r_β = {product:e} ± {sigma:e} is significantly negative")]
    InconsistentSigns { product: f64, sigma: f64 },
    #[error("mode frequencies are degenerate")]
    DegenerateFrequencies,
    #[error("need at least 2 values, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Uncertainty(#[from] UncertainError),
}

//! Frequency counting and distribution fitting.

mod counts;
mod lognormal;
mod powerlaw;
mod spearman;
pub mod zeta;

use thiserror::Error;

pub use counts::{rank_frequency, RankedCounts, RankedEntry};
pub use lognormal::{fit_reversed_lognormal, quartiles, LogNormalFit};
pub use powerlaw::{
    bootstrap_gof, default_z_min_grid, fit_degree_powerlaw, fit_shifted_powerlaw, fit_values,
    FitOptions, PowerLawFit, PowerLawSampler, Shift, ShiftedPowerLaw, MIN_TAIL,
};
pub use spearman::{correlation_matrix, midranks, spearman, spearman_values, CorrelationMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("empty input")]
    Empty,
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("tail too thin: {have} observations, need {need}")]
    ThinTail { have: u64, need: u64 },
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Linear-interpolation (type 7) quantile of ascending `sorted`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

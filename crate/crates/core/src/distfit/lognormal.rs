use serde::{Deserialize, Serialize};

use super::{quantile_type7, FitError};

pub const MIN_VALUES: usize = 10;

/// Reversed log-normal: `-x ~ LogNormal(mu, sigma)` for loudness `x < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    /// Model median, `-exp(mu)`.
    pub median_db: f64,
    pub empirical_median_db: f64,
    pub q1_db: f64,
    pub q3_db: f64,
    /// `|q1_db - q3_db|`
    pub spread_db: f64,
    pub n: usize,
}

/// Empirical (type-7) quartiles of `values`: `(q1, median, q3)`.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        quantile_type7(&sorted, 0.25),
        quantile_type7(&sorted, 0.5),
        quantile_type7(&sorted, 0.75),
    )
}

pub fn fit_reversed_lognormal(values: &[f64]) -> Result<LogNormalFit, FitError> {
    if values.len() < MIN_VALUES {
        return Err(FitError::ThinTail {
            have: values.len() as u64,
            need: MIN_VALUES as u64,
        });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v < 0.0)) {
        return Err(FitError::InvalidParameters(format!(
            "reversed log-normal needs strictly negative finite values, got {v}"
        )));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Err(FitError::Degenerate(format!(
            "all {} values are equal",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let logs: Vec<f64> = values.iter().map(|x| (-x).ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
    let (q1, med, q3) = quartiles(values);
    Ok(LogNormalFit {
        mu,
        sigma,
        median_db: -mu.exp(),
        empirical_median_db: med,
        q1_db: q1,
        q3_db: q3,
        spread_db: (q1 - q3).abs(),
        n: values.len(),
    })
}

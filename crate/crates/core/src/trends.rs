//! Per-year series, OLS slope tests and the consolidated evolution report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::distfit::CorrelationMatrix;
use crate::encode::Facet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrendError {
    #[error("trend test needs ≥ 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points share one year")]
    IdenticalYears,
    #[error("mixed configurations: {0} vs {1}")]
    ConfigMismatch(String, String),
    #[error("no facet to report")]
    NothingToReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub year: i32,
    /// Mean over replicates.
    pub value: f64,
    /// Sample standard deviation over replicates (0 for a single replicate).
    pub sd: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSeries {
    pub metric_name: String,
    /// Strictly increasing years.
    pub points: Vec<SeriesPoint>,
}

impl YearSeries {
    /// Averages replicate values per year.
    pub fn from_replicates(
        metric_name: impl Into<String>,
        values: impl IntoIterator<Item = (i32, f64)>,
    ) -> Self {
        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for (y, v) in values {
            by_year.entry(y).or_default().push(v);
        }
        let points = by_year
            .into_iter()
            .map(|(year, vs)| {
                let n = vs.len() as f64;
                let value = vs.iter().sum::<f64>() / n;
                let sd = if vs.len() > 1 {
                    (vs.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                SeriesPoint {
                    year,
                    value,
                    sd,
                    replicates: vs.len(),
                }
            })
            .collect();
        YearSeries {
            metric_name: metric_name.into(),
            points,
        }
    }

    /// CSV with header `year,mean,sd,replicates`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "year,mean,sd,replicates")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.year, p.value, p.sd, p.replicates)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    /// Units per year.
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// `None` for a perfect non-flat fit, where the statistic is unbounded.
    pub t_stat: Option<f64>,
    /// Two-sided, Student-t with n − 2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

pub fn ols_trend(series: &YearSeries) -> Result<TrendTest, TrendError> {
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .map(|p| (p.year as f64, p.value))
        .collect();
    ols(&pts)
}

/// Least-squares line through `(x, y)` with a t-test on the slope.
pub fn ols(points: &[(f64, f64)]) -> Result<TrendTest, TrendError> {
    let n = points.len();
    if n < 3 {
        return Err(TrendError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TrendError::IdenticalYears);
    }
    if points.iter().all(|p| p.1 == points[0].1) {
        return Ok(TrendTest {
            slope: 0.0,
            intercept: points[0].1,
            stderr: 0.0,
            t_stat: Some(0.0),
            p_value: 1.0,
            n,
        });
    }
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let df = nf - 2.0;

    // Residuals at rounding level count as an exact fit.
    if ssr <= 1e-20 * syy {
        return Ok(TrendTest {
            slope,
            intercept,
            stderr: 0.0,
            t_stat: None,
            p_value: 0.0,
            n,
        });
    }
    let stderr = (ssr / df / sxx).sqrt();
    let t = slope / stderr;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df ≥ 1");
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TrendTest {
        slope,
        intercept,
        stderr,
        t_stat: Some(t),
        p_value,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrendOutcome {
    Tested(TrendTest),
    NotApplicable { reason: String },
}

impl TrendOutcome {
    pub fn test(&self) -> Option<&TrendTest> {
        match self {
            TrendOutcome::Tested(t) => Some(t),
            TrendOutcome::NotApplicable { .. } => None,
        }
    }
}

/// One per-replicate value of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub facet: Facet,
    pub metric: String,
    pub center_year: i32,
    pub replicate: u32,
    pub value: f64,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTrend {
    pub series: YearSeries,
    pub trend: TrendOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetReport {
    pub facet: Facet,
    /// Keyed by metric name.
    pub metrics: BTreeMap<String, MetricTrend>,
    pub correlation: Option<CorrelationMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub config_fingerprint: String,
    pub facets: Vec<FacetReport>,
}

/// Groups observations into replicate-averaged year series and tests each
/// for a linear trend. Every observation must carry the same configuration
/// fingerprint.
pub fn assemble_report(
    facets: &[Facet],
    observations: &[Observation],
    correlations: &BTreeMap<Facet, CorrelationMatrix>,
) -> Result<EvolutionReport, TrendError> {
    if facets.is_empty() {
        return Err(TrendError::NothingToReport);
    }
    let fingerprint = observations
        .first()
        .map(|o| o.config_fingerprint.clone())
        .unwrap_or_default();
    if let Some(o) = observations
        .iter()
        .find(|o| o.config_fingerprint != fingerprint)
    {
        return Err(TrendError::ConfigMismatch(
            fingerprint,
            o.config_fingerprint.clone(),
        ));
    }

    let mut grouped: BTreeMap<(Facet, &str), Vec<(i32, f64)>> = BTreeMap::new();
    for o in observations {
        grouped
            .entry((o.facet, o.metric.as_str()))
            .or_default()
            .push((o.center_year, o.value));
    }

    let mut sorted = facets.to_vec();
    sorted.sort();
    sorted.dedup();
    let reports = sorted
        .into_iter()
        .map(|facet| {
            let metrics = grouped
                .iter()
                .filter(|((f, _), _)| *f == facet)
                .map(|((_, name), values)| {
                    let series = YearSeries::from_replicates(*name, values.iter().copied());
                    let trend = match ols_trend(&series) {
                        Ok(t) => TrendOutcome::Tested(t),
                        Err(e) => TrendOutcome::NotApplicable {
                            reason: e.to_string(),
                        },
                    };
                    (name.to_string(), MetricTrend { series, trend })
                })
                .collect();
            FacetReport {
                facet,
                metrics,
                correlation: correlations.get(&facet).cloned(),
            }
        })
        .collect();
    Ok(EvolutionReport {
        config_fingerprint: fingerprint,
        facets: reports,
    })
}

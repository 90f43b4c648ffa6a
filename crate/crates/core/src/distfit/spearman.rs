use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FitError, RankedCounts};

/// Midranks (1-based, ties share their average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of midranks, i.e. the tie-corrected Spearman ρ.
pub fn spearman_values(x: &[f64], y: &[f64]) -> Result<f64, FitError> {
    assert_eq!(x.len(), y.len());
    if x.is_empty() {
        return Err(FitError::Empty);
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FitError::Degenerate(
            "all ranks tied on one side; Spearman ρ undefined".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman ρ between two count tables over the union of their codewords;
/// a codeword missing on one side counts 0 there.
pub fn spearman(a: &RankedCounts, b: &RankedCounts) -> Result<f64, FitError> {
    if a.is_empty() || b.is_empty() {
        return Err(FitError::Empty);
    }
    let mut union: BTreeMap<u16, (u64, u64)> = BTreeMap::new();
    for e in a.entries() {
        union.entry(e.codeword).or_default().0 = e.count;
    }
    for e in b.entries() {
        union.entry(e.codeword).or_default().1 = e.count;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = union.values().map(|&(p, q)| (p as f64, q as f64)).unzip();
    spearman_values(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub years: Vec<i32>,
    /// Row-major, symmetric, unit diagonal.
    pub rho: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Off-diagonal coefficients, upper triangle.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.years.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.rho[i][j])
            .collect()
    }

    /// CSV: header `year,<y1>,<y2>,…`, then one row per year.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "year")?;
        for y in &self.years {
            write!(out, ",{y}")?;
        }
        writeln!(out)?;
        for (y, row) in self.years.iter().zip(&self.rho) {
            write!(out, "{y}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Pairwise Spearman ρ between years; each year's replicate counts are summed
/// before ranking. Input years must be distinct.
pub fn correlation_matrix(
    per_year: &[(i32, Vec<RankedCounts>)],
) -> Result<CorrelationMatrix, FitError> {
    if per_year.len() < 2 {
        return Err(FitError::InvalidParameters(format!(
            "correlation matrix needs ≥ 2 years, got {}",
            per_year.len()
        )));
    }
    let mut rows: Vec<(i32, RankedCounts)> = per_year
        .iter()
        .map(|(y, reps)| Ok((*y, RankedCounts::merged(reps)?)))
        .collect::<Result<_, FitError>>()?;
    rows.sort_by_key(|r| r.0);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(FitError::InvalidParameters(
            "duplicate year in correlation input".into(),
        ));
    }
    let n = rows.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| spearman(&rows[i].1, &rows[j].1))
        .collect::<Result<Vec<f64>, FitError>>()?;
    let mut rho = vec![vec![0.0; n]; n];
    for (i, row) in rho.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), v) in pairs.iter().zip(values) {
        rho[i][j] = v;
        rho[j][i] = v;
    }
    Ok(CorrelationMatrix {
        years: rows.iter().map(|r| r.0).collect(),
        rho,
    })
}

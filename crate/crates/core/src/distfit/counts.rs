use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FitError;
use crate::sampler::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub codeword: u16,
    pub count: u64,
    /// `count / total`
    pub rel_freq: f64,
    /// 1-based
    pub rank: usize,
}

/// Codeword counts sorted by decreasing count, ties by ascending codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCounts {
    entries: Vec<RankedEntry>,
    total: u64,
}

impl RankedCounts {
    /// Zero counts are dropped.
    pub fn from_counts(counts: impl IntoIterator<Item = (u16, u64)>) -> Result<Self, FitError> {
        let mut merged: BTreeMap<u16, u64> = BTreeMap::new();
        for (cw, n) in counts {
            if n > 0 {
                *merged.entry(cw).or_default() += n;
            }
        }
        let total: u64 = merged.values().sum();
        if total == 0 {
            return Err(FitError::Empty);
        }
        let mut pairs: Vec<(u16, u64)> = merged.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let entries = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (codeword, count))| RankedEntry {
                codeword,
                count,
                rel_freq: count as f64 / total as f64,
                rank: i + 1,
            })
            .collect();
        Ok(RankedCounts { entries, total })
    }

    /// Sums counts across several tables (e.g. the replicates of one year).
    pub fn merged<'a>(
        tables: impl IntoIterator<Item = &'a RankedCounts>,
    ) -> Result<Self, FitError> {
        Self::from_counts(
            tables
                .into_iter()
                .flat_map(|t| t.entries.iter().map(|e| (e.codeword, e.count))),
        )
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.count).collect()
    }

    pub fn count_of(&self, codeword: u16) -> u64 {
        self.entries
            .iter()
            .find(|e| e.codeword == codeword)
            .map_or(0, |e| e.count)
    }

    /// CSV with header `rank,codeword,count,rel_freq`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rank,codeword,count,rel_freq")?;
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.rank, e.codeword, e.count, e.rel_freq)?;
        }
        Ok(())
    }
}

/// Exact codeword counts over every beat of the sample.
pub fn rank_frequency(sample: &Sample) -> Result<RankedCounts, FitError> {
    let mut counts = vec![0u64; 1 << 16];
    for cw in sample.codewords() {
        counts[cw as usize] += 1;
    }
    RankedCounts::from_counts(
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, n)| n > 0)
            .map(|(cw, n)| (cw as u16, n)),
    )
}

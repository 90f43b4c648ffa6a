//! Discrete shifted power law `P(z) = (c + z)^-β / ζ(β, c + z_min)` on
//! `z ≥ z_min`, fitted by maximum likelihood with `z_min` picked by minimal
//! Kolmogorov–Smirnov distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::zeta::hurwitz_zeta;
use super::{quantile_type7, FitError, RankedCounts};

/// A fit needs at least this many observations at or above `z_min`.
pub const MIN_TAIL: u64 = 50;
pub const BETA_MIN: f64 = 1.0 + 1e-6;
pub const BETA_MAX: f64 = 10.0;
pub const C_MAX: f64 = 1000.0;

const C_GRID: usize = 41;
const BOUNDARY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedPowerLaw {
    pub beta: f64,
    pub c: f64,
    pub z_min: u64,
}

impl ShiftedPowerLaw {
    pub fn new(beta: f64, c: f64, z_min: u64) -> Result<Self, FitError> {
        if !(beta > 1.0 && beta.is_finite()) || !(c >= 0.0 && c.is_finite()) || z_min == 0 {
            return Err(FitError::InvalidParameters(format!(
                "need β > 1, c ≥ 0, z_min ≥ 1; got β={beta}, c={c}, z_min={z_min}"
            )));
        }
        Ok(ShiftedPowerLaw { beta, c, z_min })
    }

    fn norm(&self) -> f64 {
        hurwitz_zeta(self.beta, self.c + self.z_min as f64)
    }

    pub fn pmf(&self, z: u64) -> f64 {
        if z < self.z_min {
            return 0.0;
        }
        (self.c + z as f64).powf(-self.beta) / self.norm()
    }

    /// `P(Z ≥ z)`
    pub fn tail(&self, z: u64) -> f64 {
        if z <= self.z_min {
            return 1.0;
        }
        hurwitz_zeta(self.beta, self.c + z as f64) / self.norm()
    }

    /// `P(Z ≤ z)`
    pub fn cdf(&self, z: u64) -> f64 {
        1.0 - self.tail(z + 1)
    }

    pub fn sampler(&self) -> PowerLawSampler {
        PowerLawSampler::new(*self)
    }
}

/// Inverse-CDF sampler backed by a table of tail probabilities; the far tail
/// falls back to bisection on the exact tail function.
#[derive(Debug, Clone)]
pub struct PowerLawSampler {
    law: ShiftedPowerLaw,
    norm: f64,
    /// `tails[i] = P(Z ≥ z_min + i)`
    tails: Vec<f64>,
}

impl PowerLawSampler {
    const MAX_TABLE: usize = 1 << 20;
    const TABLE_FLOOR: f64 = 1e-6;

    pub fn new(law: ShiftedPowerLaw) -> Self {
        let norm = law.norm();
        let mut tails = vec![1.0];
        let mut t = 1.0;
        let mut z = law.z_min;
        while t > Self::TABLE_FLOOR && tails.len() < Self::MAX_TABLE {
            t -= (law.c + z as f64).powf(-law.beta) / norm;
            z += 1;
            tails.push(t);
        }
        // Re-anchor the last entry on the exact value to stop drift.
        if let Some(last) = tails.last_mut() {
            *last = hurwitz_zeta(law.beta, law.c + z as f64) / norm;
        }
        PowerLawSampler { law, norm, tails }
    }

    fn exact_tail(&self, z: u64) -> f64 {
        hurwitz_zeta(self.law.beta, self.law.c + z as f64) / self.norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        let last = *self.tails.last().unwrap();
        if u > last {
            // largest i with tails[i] ≥ u
            let i = self.tails.partition_point(|&t| t >= u) - 1;
            return self.law.z_min + i as u64;
        }
        let mut lo = self.law.z_min + self.tails.len() as u64 - 1;
        let mut hi = lo.saturating_mul(2).max(lo + 1);
        while self.exact_tail(hi) >= u {
            lo = hi;
            if hi >= u64::MAX / 4 {
                return hi;
            }
            hi = hi.saturating_mul(2);
        }
        // tail(lo) ≥ u > tail(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.exact_tail(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub c: f64,
    pub z_min: u64,
    /// Rank-frequency exponent, `1 / (β - 1)`.
    pub alpha: f64,
    /// KS distance on `z ≥ z_min`.
    pub ks: f64,
    pub n_tail: u64,
    pub n_total: u64,
    pub log_likelihood: f64,
    /// Asymptotic standard error of β from the observed information.
    pub beta_stderr: Option<f64>,
    pub c_fixed: bool,
}

impl PowerLawFit {
    pub fn law(&self) -> ShiftedPowerLaw {
        ShiftedPowerLaw {
            beta: self.beta,
            c: self.c,
            z_min: self.z_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shift {
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `None` selects the default grid `{1, 2, 4, …}` up to the 90th
    /// percentile of the distinct values.
    pub z_min_candidates: Option<Vec<u64>>,
    pub shift: Shift,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            z_min_candidates: None,
            shift: Shift::Free,
        }
    }
}

/// Distinct values with multiplicities, ascending.
#[derive(Debug, Clone)]
struct Histogram(Vec<(u64, u64)>);

impl Histogram {
    fn new(values: &[u64]) -> Self {
        let mut v = values.to_vec();
        v.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::new();
        for x in v {
            match out.last_mut() {
                Some((val, m)) if *val == x => *m += 1,
                _ => out.push((x, 1)),
            }
        }
        Histogram(out)
    }

    fn tail(&self, z_min: u64) -> &[(u64, u64)] {
        let start = self.0.partition_point(|&(v, _)| v < z_min);
        &self.0[start..]
    }

    fn total(&self) -> u64 {
        self.0.iter().map(|&(_, m)| m).sum()
    }
}

/// `{1, 2, 4, …}` up to the 90th percentile of the distinct values.
pub fn default_z_min_grid(values: &[u64]) -> Vec<u64> {
    let distinct: Vec<f64> = Histogram::new(values)
        .0
        .iter()
        .filter(|&&(v, _)| v > 0)
        .map(|&(v, _)| v as f64)
        .collect();
    if distinct.is_empty() {
        return vec![1];
    }
    let p90 = quantile_type7(&distinct, 0.9);
    let mut grid = vec![1u64];
    while ((grid.last().unwrap() * 2) as f64) <= p90 {
        grid.push(grid.last().unwrap() * 2);
    }
    grid
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-11 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct TailData<'a> {
    tail: &'a [(u64, u64)],
    z_min: u64,
    n: f64,
}

impl TailData<'_> {
    fn sum_log(&self, c: f64) -> f64 {
        self.tail
            .iter()
            .map(|&(v, m)| m as f64 * (c + v as f64).ln())
            .sum()
    }

    fn ll_with(&self, beta: f64, c: f64, sum_log: f64) -> f64 {
        -beta * sum_log - self.n * hurwitz_zeta(beta, c + self.z_min as f64).ln()
    }

    fn ll(&self, beta: f64, c: f64) -> f64 {
        self.ll_with(beta, c, self.sum_log(c))
    }

    /// (β̂(c), ℓ(β̂(c), c))
    fn profile(&self, c: f64) -> (f64, f64) {
        let s = self.sum_log(c);
        golden_max(|b| self.ll_with(b, c, s), BETA_MIN, BETA_MAX)
    }

    fn ks(&self, law: &ShiftedPowerLaw) -> f64 {
        let mut cum = 0u64;
        let mut d: f64 = 0.0;
        for &(v, m) in self.tail {
            let emp_before = cum as f64 / self.n;
            d = d.max((emp_before - law.cdf(v.saturating_sub(1))).abs());
            cum += m;
            let emp = cum as f64 / self.n;
            d = d.max((emp - law.cdf(v)).abs());
        }
        d
    }

    fn beta_stderr(&self, beta: f64, c: f64, c_free: bool) -> Option<f64> {
        let hb = 1e-4 * beta.max(1.0);
        let f0 = self.ll(beta, c);
        let d_bb = (self.ll(beta + hb, c) - 2.0 * f0 + self.ll(beta - hb, c)) / (hb * hb);
        let conditional = (d_bb < 0.0).then(|| (-1.0 / d_bb).sqrt());
        let hc = 1e-4 * c.max(1.0);
        if !c_free || c < 2.0 * hc {
            return conditional;
        }
        let d_cc = (self.ll(beta, c + hc) - 2.0 * f0 + self.ll(beta, c - hc)) / (hc * hc);
        let d_bc =
            (self.ll(beta + hb, c + hc) - self.ll(beta + hb, c - hc) - self.ll(beta - hb, c + hc)
                + self.ll(beta - hb, c - hc))
                / (4.0 * hb * hc);
        let det = d_bb * d_cc - d_bc * d_bc;
        if d_bb < 0.0 && det > 0.0 {
            // [H^-1]_ββ = d_cc / det, covariance is its negative
            Some((-d_cc / det).sqrt())
        } else {
            conditional
        }
    }

    fn fit(&self, shift: Shift) -> Result<PowerLawFit, FitError> {
        let (beta, c, ll) = match shift {
            Shift::Fixed(c) => {
                let (b, ll) = self.profile(c);
                (b, c, ll)
            }
            Shift::Free => {
                let u_max = (1.0 + C_MAX).ln();
                let us: Vec<f64> = (0..C_GRID)
                    .map(|i| u_max * i as f64 / (C_GRID - 1) as f64)
                    .collect();
                let lls: Vec<f64> = us.iter().map(|&u| self.profile(u.exp_m1()).1).collect();
                let best = lls
                    .iter()
                    .enumerate()
                    .fold(0, |bi, (i, &v)| if v > lls[bi] { i } else { bi });
                let lo = us[best.saturating_sub(1)];
                let hi = us[(best + 1).min(C_GRID - 1)];
                let (u, _) = golden_max(|u| self.profile(u.exp_m1()).1, lo, hi);
                let c = u.exp_m1().max(0.0);
                let (b, ll) = self.profile(c);
                (b, c, ll)
            }
        };
        if beta >= BETA_MAX - BOUNDARY_TOL || beta <= BETA_MIN + BOUNDARY_TOL {
            return Err(FitError::NonConvergence(format!(
                "β hit the search bound ({beta:.6}) at z_min={}, c={c:.4}, n_tail={}",
                self.z_min, self.n
            )));
        }
        if matches!(shift, Shift::Free) && c >= C_MAX * (1.0 - BOUNDARY_TOL) {
            return Err(FitError::NonConvergence(format!(
                "c hit the search bound ({c:.3}) at z_min={}, β={beta:.4}, n_tail={}",
                self.z_min, self.n
            )));
        }
        let law = ShiftedPowerLaw {
            beta,
            c,
            z_min: self.z_min,
        };
        Ok(PowerLawFit {
            beta,
            c,
            z_min: self.z_min,
            alpha: 1.0 / (beta - 1.0),
            ks: self.ks(&law),
            n_tail: self.n as u64,
            n_total: 0,
            log_likelihood: ll,
            beta_stderr: self.beta_stderr(beta, c, matches!(shift, Shift::Free)),
            c_fixed: !matches!(shift, Shift::Free),
        })
    }
}

/// Fits a multiset of positive integers (zeros never enter a tail).
pub fn fit_values(values: &[u64], opts: &FitOptions) -> Result<PowerLawFit, FitError> {
    if let Shift::Fixed(c) = opts.shift {
        if !(0.0..=C_MAX).contains(&c) {
            return Err(FitError::InvalidParameters(format!(
                "fixed c={c} outside [0, {C_MAX}]"
            )));
        }
    }
    let hist = Histogram::new(values);
    if hist.0.is_empty() {
        return Err(FitError::Empty);
    }
    if hist.0.len() == 1 {
        return Err(FitError::Degenerate(format!(
            "all {} values equal {}",
            values.len(),
            hist.0[0].0
        )));
    }
    let mut candidates = match &opts.z_min_candidates {
        Some(c) => c.clone(),
        None => default_z_min_grid(values),
    };
    candidates.retain(|&z| z > 0);
    candidates.sort_unstable();
    candidates.dedup();
    let Some(&smallest) = candidates.first() else {
        return Err(FitError::InvalidParameters(
            "no positive z_min candidate".into(),
        ));
    };
    let widest = Histogram(hist.tail(smallest).to_vec()).total();
    if widest < MIN_TAIL {
        return Err(FitError::ThinTail {
            have: widest,
            need: MIN_TAIL,
        });
    }

    let n_total = hist.total();
    let mut best: Option<PowerLawFit> = None;
    let mut first_err = None;
    for &z_min in &candidates {
        let tail = hist.tail(z_min);
        let n: u64 = tail.iter().map(|&(_, m)| m).sum();
        if n < MIN_TAIL || tail.len() < 2 {
            continue;
        }
        let data = TailData {
            tail,
            z_min,
            n: n as f64,
        };
        match data.fit(opts.shift) {
            Ok(mut fit) => {
                fit.n_total = n_total;
                if best.as_ref().is_none_or(|b| fit.ks < b.ks) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::debug!("z_min={z_min}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(fit), _) => Ok(fit),
        (None, Some(e)) => Err(e),
        (None, None) => Err(FitError::Degenerate(
            "no z_min candidate leaves a tail with two or more distinct values".into(),
        )),
    }
}

/// Fits the codeword counts themselves, i.e. `z` is the random variable.
pub fn fit_shifted_powerlaw(
    counts: &RankedCounts,
    z_min_candidates: Option<&[u64]>,
) -> Result<PowerLawFit, FitError> {
    fit_values(
        &counts.counts(),
        &FitOptions {
            z_min_candidates: z_min_candidates.map(<[u64]>::to_vec),
            shift: Shift::Free,
        },
    )
}

/// Pure power law `P(k) ∝ k^-γ` for `k ≥ k_min`; γ is reported as `beta`.
pub fn fit_degree_powerlaw(degrees: &[u64]) -> Result<PowerLawFit, FitError> {
    fit_values(
        degrees,
        &FitOptions {
            z_min_candidates: None,
            shift: Shift::Fixed(0.0),
        },
    )
}

fn bootstrap_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"musevo/gof/v1");
    h.update(seed.to_le_bytes());
    h.update((replicate as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Semiparametric bootstrap p-value: the fraction of `b` synthetic datasets
/// whose refitted KS distance is at least the observed one. Synthetic values
/// below `z_min` are resampled from the data, the rest drawn from the fit.
/// Replicates whose refit fails are left out of the fraction.
pub fn bootstrap_gof(
    values: &[u64],
    fit: &PowerLawFit,
    opts: &FitOptions,
    b: usize,
    seed: u64,
) -> Result<f64, FitError> {
    if b == 0 {
        return Err(FitError::InvalidParameters("bootstrap needs B ≥ 1".into()));
    }
    let below: Vec<u64> = values.iter().copied().filter(|&v| v < fit.z_min).collect();
    let n = values.len();
    let p_tail = fit.n_tail as f64 / n as f64;
    let sampler = fit.law().sampler();

    let outcomes: Vec<Option<bool>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = bootstrap_rng(seed, r);
            let synth: Vec<u64> = (0..n)
                .map(|_| {
                    if below.is_empty() || rng.random::<f64>() < p_tail {
                        sampler.sample(&mut rng)
                    } else {
                        below[rng.random_range(0..below.len())]
                    }
                })
                .collect();
            match fit_values(&synth, opts) {
                Ok(f) => Some(f.ks >= fit.ks),
                Err(e) => {
                    log::debug!("bootstrap replicate {r} refit failed: {e}");
                    None
                }
            }
        })
        .collect();
    let done = outcomes.iter().flatten().count();
    if done == 0 {
        return Err(FitError::NonConvergence(format!(
            "all {b} bootstrap refits failed"
        )));
    }
    let exceed = outcomes.iter().flatten().filter(|&&x| x).count();
    Ok(exceed as f64 / done as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_sums_to_one_and_tail_is_consistent() {
        let law = ShiftedPowerLaw::new(2.5, 1.5, 3).unwrap();
        let total: f64 = (3..200_000).map(|z| law.pmf(z)).sum::<f64>() + law.tail(200_000);
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(law.tail(3), 1.0);
        assert_eq!(law.pmf(2), 0.0);
        for z in [3u64, 4, 10, 1000] {
            assert!((law.tail(z) - law.pmf(z) - law.tail(z + 1)).abs() < 1e-14);
        }
    }

    #[test]
    fn sampler_frequencies_match_pmf() {
        let law = ShiftedPowerLaw::new(2.18, 1.0, 1).unwrap();
        let s = law.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut hits = [0u64; 4];
        for _ in 0..n {
            let z = s.sample(&mut rng);
            assert!(z >= 1);
            if z <= 4 {
                hits[(z - 1) as usize] += 1;
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let p = law.pmf(i as u64 + 1);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((h as f64 - n as f64 * p).abs() < 4.0 * sd, "z={}", i + 1);
        }
    }

    #[test]
    fn degenerate_and_thin_inputs() {
        assert!(matches!(
            fit_values(&[7; 500], &FitOptions::default()),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_degree_powerlaw(&[4; 100]),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_values(&[1, 2, 3, 4], &FitOptions::default()),
            Err(FitError::ThinTail { have: 4, .. })
        ));
        assert!(matches!(
            fit_values(&[], &FitOptions::default()),
            Err(FitError::Empty)
        ));
    }

    #[test]
    fn default_grid_stops_at_ninetieth_percentile() {
        let values: Vec<u64> = (1..=100).collect();
        // type-7 p90 of 1..=100 is 90.1
        assert_eq!(default_z_min_grid(&values), vec![1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(default_z_min_grid(&[1, 1, 1]), vec![1]);
    }

    #[test]
    fn alpha_beta_relation_holds() {
        let law = ShiftedPowerLaw::new(2.4, 3.0, 1).unwrap();
        let s = law.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<u64> = (0..5000).map(|_| s.sample(&mut rng)).collect();
        let fit = fit_values(&v, &FitOptions::default()).unwrap();
        assert!((fit.alpha * (fit.beta - 1.0) - 1.0).abs() < 1e-12);
        assert!(fit.ks >= 0.0 && fit.ks <= 1.0);
        assert_eq!(fit.n_total, 5000);
        assert!(fit.beta_stderr.unwrap() > 0.0);
    }

    #[test]
    fn bootstrap_with_one_replicate_is_zero_or_one() {
        let law = ShiftedPowerLaw::new(2.2, 0.5, 1).unwrap();
        let s = law.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<u64> = (0..400).map(|_| s.sample(&mut rng)).collect();
        let opts = FitOptions::default();
        let fit = fit_values(&v, &opts).unwrap();
        let p = bootstrap_gof(&v, &fit, &opts, 1, 9).unwrap();
        assert!(p == 0.0 || p == 1.0);
        assert!(bootstrap_gof(&v, &fit, &opts, 0, 9).is_err());
    }
}

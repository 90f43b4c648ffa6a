//! Test-side oracles that share no code with the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Inverse-CDF sampler for `P(z) ∝ (c + z)^-β`, `z ≥ z_min`, from an explicit
/// cumulative table. The normalization adds an Euler-Maclaurin tail past the
/// table end; draws that land there use the continuous inverse.
pub struct PowerLawOracle {
    beta: f64,
    c: f64,
    z_min: u64,
    cdf: Vec<f64>,
}

impl PowerLawOracle {
    pub fn new(beta: f64, c: f64, z_min: u64, table_len: usize) -> Self {
        let f = |z: f64| (c + z).powf(-beta);
        let last = z_min as f64 + table_len as f64 - 1.0;
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(table_len);
        for i in 0..table_len {
            acc += f(z_min as f64 + i as f64);
            cdf.push(acc);
        }
        // sum_{z > last} f(z) = ∫_last^∞ f − f(last)/2 − f'(last)/12 + …
        let integral = (c + last).powf(1.0 - beta) / (beta - 1.0);
        let fprime = -beta * (c + last).powf(-beta - 1.0);
        let tail = integral - f(last) / 2.0 - fprime / 12.0;
        let total = acc + tail;
        for v in &mut cdf {
            *v /= total;
        }
        PowerLawOracle {
            beta,
            c,
            z_min,
            cdf,
        }
    }

    pub fn cdf(&self, z: u64) -> f64 {
        if z < self.z_min {
            0.0
        } else {
            self.cdf[(z - self.z_min) as usize]
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&p| p < u);
        if i < self.cdf.len() {
            return self.z_min + i as u64;
        }
        // continuous tail: P(Z > x) ∝ (c + x)^(1-β)
        let last = self.z_min as f64 + self.cdf.len() as f64 - 1.0;
        let q = (1.0 - u) / (1.0 - self.cdf.last().unwrap());
        let x = (self.c + last + 0.5) * q.powf(-1.0 / (self.beta - 1.0)) - self.c;
        x.round().max(last + 1.0) as u64
    }

    pub fn draws(&self, n: usize, seed: u64) -> Vec<u64> {
        let mut r = rng(seed);
        (0..n).map(|_| self.sample(&mut r)).collect()
    }
}

/// Simple undirected graph as an adjacency matrix.
pub struct Dense {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
}

impl Dense {
    pub fn new(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            adj[a as usize][b as usize] = true;
            adj[b as usize][a as usize] = true;
        }
        Dense { n, adj }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&x| x).count()
    }

    /// All-pairs distances, `usize::MAX` when unreachable.
    pub fn floyd_warshall(&self) -> Vec<Vec<usize>> {
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; self.n]; self.n];
        for i in 0..self.n {
            d[i][i] = 0;
            for j in 0..self.n {
                if self.adj[i][j] {
                    d[i][j] = 1;
                }
            }
        }
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    /// Mean distance over ordered pairs inside the largest component; ties go
    /// to the component holding the smallest node.
    pub fn avg_path_oracle(&self) -> f64 {
        let d = self.floyd_warshall();
        let inf = usize::MAX / 4;
        let mut seen = vec![false; self.n];
        let mut best: Vec<usize> = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let comp: Vec<usize> = (0..self.n).filter(|&t| d[s][t] < inf).collect();
            for &t in &comp {
                seen[t] = true;
            }
            if comp.len() > best.len() {
                best = comp;
            }
        }
        let k = best.len();
        let total: usize = best
            .iter()
            .flat_map(|&a| best.iter().map(move |&b| (a, b)))
            .map(|(a, b)| d[a][b])
            .sum();
        total as f64 / (k * (k - 1)) as f64
    }

    /// Mean over all nodes of triangles / possible triangles, by enumerating
    /// every neighbour pair.
    pub fn clustering_oracle(&self) -> f64 {
        let mut sum = 0.0;
        for v in 0..self.n {
            let nb: Vec<usize> = (0..self.n).filter(|&u| self.adj[v][u]).collect();
            let k = nb.len();
            if k < 2 {
                continue;
            }
            let mut tri = 0usize;
            for i in 0..k {
                for j in (i + 1)..k {
                    if self.adj[nb[i]][nb[j]] {
                        tri += 1;
                    }
                }
            }
            sum += tri as f64 / (k * (k - 1) / 2) as f64;
        }
        sum / self.n as f64
    }
}

/// G(n, p) edge list.
pub fn erdos_renyi(n: u32, p: f64, seed: u64) -> Vec<(u32, u32)> {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if r.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Ring where each node links to its `k / 2` nearest neighbours on each side.
pub fn ring_lattice(n: u32, k: u32) -> Vec<(u32, u32)> {
    let mut set = BTreeSet::new();
    for a in 0..n {
        for s in 1..=k / 2 {
            let b = (a + s) % n;
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

/// Ring lattice with each edge's far end rewired with probability `p`.
pub fn watts_strogatz(n: u32, k: u32, p: f64, seed: u64) -> Vec<(u32, u32)> {
    let mut r = rng(seed);
    let mut set: BTreeSet<(u32, u32)> = ring_lattice(n, k).into_iter().collect();
    for (a, b) in ring_lattice(n, k) {
        if r.random::<f64>() < p {
            let c = r.random_range(0..n);
            let e = (a.min(c), a.max(c));
            if c != a && !set.contains(&e) {
                set.remove(&(a, b));
                set.insert(e);
            }
        }
    }
    set.into_iter().collect()
}

/// Box-Muller standard normal.
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

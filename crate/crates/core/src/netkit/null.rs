//! Degree-preserving randomization by double-edge swaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{graph_clustering, graph_path_stats, NetworkMetrics};
use super::{Graph, NetError, TransitionNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub swaps_per_edge: u32,
    pub realizations: u32,
    pub seed: u64,
    /// Hub exclusion applied to l and C of each realization.
    pub exclude_top_hubs: usize,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig {
            swaps_per_edge: 10,
            realizations: 10,
            seed: 0,
            exclude_top_hubs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullMetrics {
    pub l_rand_mean: f64,
    pub l_rand_sd: f64,
    #[serde(rename = "C_rand_mean")]
    pub c_rand_mean: f64,
    #[serde(rename = "C_rand_sd")]
    pub c_rand_sd: f64,
    pub realizations: u32,
    pub swaps_per_edge: u32,
    pub accepted_swaps: u64,
    /// No legal swap exists; metrics are those of the unmodified graph.
    pub degenerate: bool,
    pub exclude_top_hubs: usize,
}

type Edge = (u32, u32);

fn norm(a: u32, b: u32) -> Edge {
    (a.min(b), a.max(b))
}

/// Graphs up to this many nodes keep edge membership in an n × n bit matrix.
const BIT_MATRIX_MAX_NODES: usize = 8192;

enum EdgeSet {
    Hash(FxHashSet<Edge>),
    Bits { n: usize, words: Vec<u64> },
}

impl EdgeSet {
    fn new(n: usize, edges: &[Edge]) -> Self {
        let mut set = if n <= BIT_MATRIX_MAX_NODES {
            EdgeSet::Bits {
                n,
                words: vec![0; (n * n).div_ceil(64)],
            }
        } else {
            EdgeSet::Hash(FxHashSet::default())
        };
        for &e in edges {
            set.insert(e);
        }
        set
    }

    fn bit(n: usize, (a, b): Edge) -> (usize, u64) {
        let i = a as usize * n + b as usize;
        (i / 64, 1 << (i % 64))
    }

    fn contains(&self, e: &Edge) -> bool {
        match self {
            EdgeSet::Hash(h) => h.contains(e),
            EdgeSet::Bits { n, words } => {
                let (w, m) = Self::bit(*n, *e);
                words[w] & m != 0
            }
        }
    }

    fn insert(&mut self, e: Edge) {
        match self {
            EdgeSet::Hash(h) => {
                h.insert(e);
            }
            EdgeSet::Bits { n, words } => {
                let (w, m) = Self::bit(*n, e);
                words[w] |= m;
            }
        }
    }

    fn remove(&mut self, e: &Edge) {
        match self {
            EdgeSet::Hash(h) => {
                h.remove(e);
            }
            EdgeSet::Bits { n, words } => {
                let (w, m) = Self::bit(*n, *e);
                words[w] &= !m;
            }
        }
    }
}

struct Rewirer {
    edges: Vec<Edge>,
    present: EdgeSet,
}

impl Rewirer {
    fn new(n: usize, edges: Vec<Edge>) -> Self {
        let present = EdgeSet::new(n, &edges);
        Rewirer { edges, present }
    }

    /// The swap `{a,b},{c,d} → {a,d},{c,b}` if it keeps the graph simple.
    fn legal(&self, (a, b): Edge, (c, d): Edge) -> Option<(Edge, Edge)> {
        if a == d || c == b {
            return None;
        }
        let (e1, e2) = (norm(a, d), norm(c, b));
        if e1 == e2 || self.present.contains(&e1) || self.present.contains(&e2) {
            return None;
        }
        Some((e1, e2))
    }

    fn attempt<R: Rng>(&mut self, rng: &mut R) -> bool {
        let m = self.edges.len();
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = self.edges[i];
        let (mut c, mut d) = self.edges[j];
        if rng.random::<bool>() {
            std::mem::swap(&mut c, &mut d);
        }
        let Some((e1, e2)) = self.legal((a, b), (c, d)) else {
            return false;
        };
        self.present.remove(&self.edges[i]);
        self.present.remove(&self.edges[j]);
        self.present.insert(e1);
        self.present.insert(e2);
        self.edges[i] = e1;
        self.edges[j] = e2;
        true
    }

    fn any_legal_swap(&self) -> bool {
        let m = self.edges.len();
        (0..m).any(|i| {
            (0..m).any(|j| {
                let (c, d) = self.edges[j];
                i != j
                    && (self.legal(self.edges[i], (c, d)).is_some()
                        || self.legal(self.edges[i], (d, c)).is_some())
            })
        })
    }
}

fn realization_rng(seed: u64, realization: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"musevo/rewire/v1");
    h.update(seed.to_le_bytes());
    h.update(realization.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Realization `realization` of the rewiring of `g` and its number of
/// accepted swaps; [`rewire_null`] averages over realizations `0..r`.
pub fn rewired_graph(g: &Graph, swaps_per_edge: u32, seed: u64, realization: u32) -> (Graph, u64) {
    let edges = g.edge_list();
    // a swap needs two distinct edges
    let attempts = if edges.len() < 2 {
        0
    } else {
        swaps_per_edge as u64 * edges.len() as u64
    };
    let mut rw = Rewirer::new(g.num_nodes(), edges);
    let mut rng = realization_rng(seed, realization);
    let mut accepted = 0;
    for _ in 0..attempts {
        accepted += rw.attempt(&mut rng) as u64;
    }
    (
        Graph::from_edge_indices(g.labels().to_vec(), &rw.edges),
        accepted,
    )
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and spread of `l` and `C` over degree-preserving randomizations.
pub fn rewire_null(net: &TransitionNetwork, cfg: &NullConfig) -> Result<NullMetrics, NetError> {
    rewire_nulls(net, cfg, &[cfg.exclude_top_hubs])
        .pop()
        .expect("one hub count")
}

/// [`rewire_null`] for several hub exclusions, sharing each realization.
/// `cfg.exclude_top_hubs` is ignored; results follow `hub_counts`.
pub fn rewire_nulls(
    net: &TransitionNetwork,
    cfg: &NullConfig,
    hub_counts: &[usize],
) -> Vec<Result<NullMetrics, NetError>> {
    match rewire_nulls_graph(&net.graph(), cfg, hub_counts) {
        Ok(v) => v,
        Err(e) => vec![Err(e); hub_counts.len()],
    }
}

type Run = (Vec<Result<(f64, f64), NetError>>, u64);

pub(crate) fn rewire_nulls_graph(
    g: &Graph,
    cfg: &NullConfig,
    hub_counts: &[usize],
) -> Result<Vec<Result<NullMetrics, NetError>>, NetError> {
    let e = g.num_edges();
    if e < 2 {
        return Err(NetError::TooFewEdges(e));
    }
    if cfg.realizations == 0 {
        return Err(NetError::Invalid("null model needs ≥ 1 realization".into()));
    }
    let runs: Vec<Run> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let (rg, accepted) = rewired_graph(g, cfg.swaps_per_edge, cfg.seed, r);
            debug_assert_eq!(rg.degrees(), g.degrees());
            let per_hubs = hub_counts
                .iter()
                .map(|&h| {
                    let l = graph_path_stats(&rg, h)?.l;
                    let c = graph_clustering(&rg, h)?;
                    Ok((l, c))
                })
                .collect();
            (per_hubs, accepted)
        })
        .collect();
    let accepted: u64 = runs.iter().map(|r| r.1).sum();
    let degenerate = accepted == 0 && !Rewirer::new(g.num_nodes(), g.edge_list()).any_legal_swap();
    let summarize = |i: usize, hubs: usize| {
        let lc = runs
            .iter()
            .map(|r| r.0[i].clone())
            .collect::<Result<Vec<(f64, f64)>, NetError>>()?;
        let ls: Vec<f64> = lc.iter().map(|r| r.0).collect();
        let cs: Vec<f64> = lc.iter().map(|r| r.1).collect();
        let (l_rand_mean, l_rand_sd) = mean_sd(&ls);
        let (c_rand_mean, c_rand_sd) = mean_sd(&cs);
        Ok(NullMetrics {
            l_rand_mean,
            l_rand_sd,
            c_rand_mean,
            c_rand_sd,
            realizations: cfg.realizations,
            swaps_per_edge: cfg.swaps_per_edge,
            accepted_swaps: accepted,
            degenerate,
            exclude_top_hubs: hubs,
        })
    };
    Ok(hub_counts
        .iter()
        .enumerate()
        .map(|(i, &h)| summarize(i, h))
        .collect())
}

/// `S = (C / C_rand) / (l / l_rand)`.
pub fn small_worldness(m: &NetworkMetrics, null: &NullMetrics) -> Result<f64, NetError> {
    if null.degenerate {
        return Err(NetError::DegenerateNull);
    }
    if !(null.c_rand_mean > 0.0 && null.l_rand_mean > 0.0) {
        return Err(NetError::Invalid(format!(
            "null baselines must be positive (C_rand={}, l_rand={})",
            null.c_rand_mean, null.l_rand_mean
        )));
    }
    Ok((m.c / null.c_rand_mean) / (m.l / null.l_rand_mean))
}

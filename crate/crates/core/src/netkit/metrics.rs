use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{BfsBuffers, BFS_LANES};
use super::{Graph, NetError, TransitionNetwork};
use crate::distfit::{fit_degree_powerlaw, PowerLawFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Mean BFS distance over ordered pairs of the largest component.
    pub l: f64,
    pub component_size: usize,
    /// Component size relative to the nodes left after hub removal.
    pub component_fraction: f64,
}

pub(crate) fn graph_path_stats(g: &Graph, exclude_top_hubs: usize) -> Result<PathStats, NetError> {
    let alive = g.hub_mask(exclude_top_hubs);
    let remaining = alive.iter().filter(|&&a| a).count();
    if remaining == 0 {
        return Err(NetError::EmptyGraph);
    }
    let comp = g.largest_component(&alive);
    if comp.len() < 2 {
        return Err(NetError::ComponentTooSmall(comp.len()));
    }
    let (sum, pairs) = comp
        .par_chunks(BFS_LANES)
        .map_init(
            || BfsBuffers::new(g.num_nodes()),
            |buf, sources| g.bfs_distance_sums(sources, &alive, buf),
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    debug_assert_eq!(pairs, (comp.len() * (comp.len() - 1)) as u64);
    Ok(PathStats {
        l: sum as f64 / pairs as f64,
        component_size: comp.len(),
        component_fraction: comp.len() as f64 / remaining as f64,
    })
}

pub(crate) fn graph_clustering(g: &Graph, exclude_top_hubs: usize) -> Result<f64, NetError> {
    let alive = g.hub_mask(exclude_top_hubs);
    let nodes: Vec<usize> = (0..g.num_nodes()).filter(|&i| alive[i]).collect();
    if nodes.is_empty() {
        return Err(NetError::EmptyGraph);
    }
    let n = g.num_nodes();
    let words = n.div_ceil(64);
    let alive_nbrs = |v: usize| -> Vec<u32> {
        g.neighbors(v)
            .iter()
            .copied()
            .filter(|&u| alive[u as usize])
            .collect()
    };
    // bitset rows pay off once a row is shorter than a typical neighbor list
    let dense = n <= 16_384 && words < 2 * g.num_edges() / n.max(1);
    let local: Vec<f64> = if dense {
        let rows: Vec<Vec<u64>> = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut row = vec![0u64; words];
                if alive[v] {
                    for u in alive_nbrs(v) {
                        row[u as usize / 64] |= 1 << (u % 64);
                    }
                }
                row
            })
            .collect();
        nodes
            .par_iter()
            .map(|&v| {
                let nbrs = alive_nbrs(v);
                let links: u64 = nbrs
                    .iter()
                    .map(|&u| {
                        rows[v]
                            .iter()
                            .zip(&rows[u as usize])
                            .map(|(a, b)| (a & b).count_ones() as u64)
                            .sum::<u64>()
                    })
                    .sum();
                local_coefficient(links, nbrs.len())
            })
            .collect()
    } else {
        nodes
            .par_iter()
            .map_init(
                || vec![0u8; n],
                |mark, &v| {
                    let nbrs = alive_nbrs(v);
                    for &u in &nbrs {
                        mark[u as usize] = 1;
                    }
                    let links: u64 = nbrs
                        .iter()
                        .map(|&u| {
                            g.neighbors(u as usize)
                                .iter()
                                .map(|&w| mark[w as usize] as u64)
                                .sum::<u64>()
                        })
                        .sum();
                    for &u in &nbrs {
                        mark[u as usize] = 0;
                    }
                    local_coefficient(links, nbrs.len())
                },
            )
            .collect()
    };
    Ok(local.iter().sum::<f64>() / nodes.len() as f64)
}

/// `links` counts every neighbor-neighbor edge from both ends.
fn local_coefficient(links: u64, k: usize) -> f64 {
    if k < 2 {
        0.0
    } else {
        links as f64 / (k * (k - 1)) as f64
    }
}

pub fn path_stats(net: &TransitionNetwork, exclude_top_hubs: usize) -> Result<PathStats, NetError> {
    graph_path_stats(&net.graph(), exclude_top_hubs)
}

/// Average shortest path length `l` on the largest connected component,
/// after removing the `exclude_top_hubs` highest-degree nodes.
pub fn avg_shortest_path(
    net: &TransitionNetwork,
    exclude_top_hubs: usize,
) -> Result<f64, NetError> {
    path_stats(net, exclude_top_hubs).map(|p| p.l)
}

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
pub fn clustering(net: &TransitionNetwork, exclude_top_hubs: usize) -> Result<f64, NetError> {
    graph_clustering(&net.graph(), exclude_top_hubs)
}

/// Γ = node-averaged mean neighbour degree / (⟨k²⟩ / ⟨k⟩), over nodes with at
/// least one edge. Exactly 1 when all those nodes share one degree.
pub fn assortativity_ratio(net: &TransitionNetwork) -> Result<f64, NetError> {
    graph_assortativity(&net.graph())
}

pub(crate) fn graph_assortativity(g: &Graph) -> Result<f64, NetError> {
    let deg = g.degrees();
    let active: Vec<usize> = (0..g.num_nodes()).filter(|&i| deg[i] > 0).collect();
    if active.is_empty() {
        return Err(NetError::NoEdges);
    }
    let k0 = deg[active[0]];
    if active.iter().all(|&i| deg[i] == k0) {
        return Ok(1.0);
    }
    let knn_sum: f64 = active
        .iter()
        .map(|&i| {
            let s: usize = g.neighbors(i).iter().map(|&u| deg[u as usize]).sum();
            s as f64 / deg[i] as f64
        })
        .sum();
    let knn = knn_sum / active.len() as f64;
    let k1: usize = active.iter().map(|&i| deg[i]).sum();
    let k2: usize = active.iter().map(|&i| deg[i] * deg[i]).sum();
    Ok(knn / (k2 as f64 / k1 as f64))
}

/// Median with the two central order statistics averaged for even counts.
fn median_usize(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub median_degree: f64,
    pub degree_fit: Option<PowerLawFit>,
    /// Why the degree law could not be fitted, if it could not.
    pub degree_fit_error: Option<String>,
}

pub fn degree_stats(net: &TransitionNetwork) -> Result<DegreeStats, NetError> {
    let g = net.graph();
    if g.num_nodes() == 0 {
        return Err(NetError::EmptyGraph);
    }
    let mut deg = g.degrees();
    let median_degree = median_usize(&mut deg);
    let as_u64: Vec<u64> = deg.iter().map(|&d| d as u64).collect();
    let (degree_fit, degree_fit_error) = match fit_degree_powerlaw(&as_u64) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DegreeStats {
        median_degree,
        degree_fit,
        degree_fit_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub num_nodes: usize,
    pub num_edges: usize,
    /// E / N; stays O(1) for sparse networks.
    pub edge_node_ratio: f64,
    pub degrees: DegreeStats,
    pub l: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Always computed on the full network.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    pub component_fraction: f64,
    pub hub_excluded: bool,
    pub excluded_hubs: usize,
}

pub fn network_metrics(
    net: &TransitionNetwork,
    exclude_top_hubs: usize,
) -> Result<NetworkMetrics, NetError> {
    let g = net.graph();
    let path = graph_path_stats(&g, exclude_top_hubs)?;
    Ok(NetworkMetrics {
        num_nodes: net.num_nodes(),
        num_edges: net.num_edges(),
        edge_node_ratio: net.num_edges() as f64 / net.num_nodes() as f64,
        degrees: degree_stats(net)?,
        l: path.l,
        c: graph_clustering(&g, exclude_top_hubs)?,
        gamma: graph_assortativity(&g)?,
        component_fraction: path.component_fraction,
        hub_excluded: exclude_top_hubs > 0,
        excluded_hubs: exclude_top_hubs,
    })
}

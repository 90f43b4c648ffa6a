//! Codeword transition networks.
//!
//! Nodes are codewords, undirected edges join codewords that follow each
//! other inside a track. Self-transitions are dropped and edge multiplicity is
//! kept as a weight, but every metric here treats the graph as simple and
//! unweighted.

mod graph;
mod metrics;
mod null;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use thiserror::Error;

use crate::encode::Facet;
use crate::sampler::Sample;

pub use graph::Graph;
pub use metrics::{
    assortativity_ratio, avg_shortest_path, clustering, degree_stats, network_metrics, path_stats,
    DegreeStats, NetworkMetrics, PathStats,
};
pub use null::{
    rewire_null, rewire_nulls, rewired_graph, small_worldness, NullConfig, NullMetrics,
};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("empty sample")]
    EmptySample,
    #[error("graph is empty")]
    EmptyGraph,
    #[error("graph has no edges")]
    NoEdges,
    #[error("largest component has {0} node(s), need ≥ 2")]
    ComponentTooSmall(usize),
    #[error("rewiring needs ≥ 2 edges, graph has {0}")]
    TooFewEdges(usize),
    #[error("null model is degenerate (no legal swap exists)")]
    DegenerateNull,
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionNetwork {
    pub facet: Facet,
    nodes: BTreeSet<NodeId>,
    /// `(a, b)` with `a < b` → multiplicity
    edges: BTreeMap<(NodeId, NodeId), u64>,
}

impl TransitionNetwork {
    /// Builds a network from explicit nodes and edges. Edge endpoints are
    /// added as nodes; self-loops are rejected.
    pub fn from_edges(
        facet: Facet,
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, NetError> {
        let mut net = TransitionNetwork {
            facet,
            nodes: nodes.into_iter().collect(),
            edges: BTreeMap::new(),
        };
        for (a, b) in edges {
            if a == b {
                return Err(NetError::Invalid(format!("self-loop on node {a}")));
            }
            net.add_transition(a, b);
        }
        Ok(net)
    }

    fn add_transition(&mut self, a: NodeId, b: NodeId) {
        self.nodes.insert(a);
        self.nodes.insert(b);
        if a != b {
            *self.edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    /// `((a, b), weight)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = ((NodeId, NodeId), u64)> + '_ {
        self.edges.iter().map(|(&e, &w)| (e, w))
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> u64 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn graph(&self) -> Graph {
        Graph::from_network(self)
    }

    /// Edge list CSV, header `id_a,id_b,weight`.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id_a,id_b,weight")?;
        for ((a, b), w) in self.edges() {
            writeln!(out, "{a},{b},{w}")?;
        }
        Ok(())
    }
}

/// Transition network of a sample; pairs never span two tracks.
pub fn build_network(sample: &Sample) -> Result<TransitionNetwork, NetError> {
    if sample.total_beats() == 0 || sample.sequences.iter().all(Vec::is_empty) {
        return Err(NetError::EmptySample);
    }
    let mut nodes = Vec::new();
    let mut pairs = Vec::new();
    for seq in &sample.sequences {
        nodes.extend(seq.iter().map(|&w| w as NodeId));
        for w in seq.windows(2) {
            let (a, b) = (w[0] as NodeId, w[1] as NodeId);
            if a != b {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    pairs.sort_unstable();
    let edges = pairs
        .chunk_by(|x, y| x == y)
        .map(|run| (run[0], run.len() as u64));
    Ok(TransitionNetwork {
        facet: sample.facet(),
        nodes: nodes.into_iter().collect(),
        edges: edges.collect(),
    })
}

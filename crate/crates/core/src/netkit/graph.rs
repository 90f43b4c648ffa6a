use std::collections::VecDeque;

use super::{NodeId, TransitionNetwork};

/// Compact simple undirected graph: nodes are indices into `labels`
/// (ascending), adjacency lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<NodeId>,
    adj: Vec<Vec<u32>>,
}

impl Graph {
    pub fn from_network(net: &TransitionNetwork) -> Self {
        let labels: Vec<NodeId> = net.nodes().collect();
        let index = |id: NodeId| labels.binary_search(&id).unwrap() as u32;
        let edges: Vec<(u32, u32)> = net
            .edges()
            .map(|((a, b), _)| (index(a), index(b)))
            .collect();
        Self::from_edge_indices(labels.clone(), &edges)
    }

    /// `edges` are pairs of node indices; duplicates are the caller's problem.
    pub fn from_edge_indices(labels: Vec<NodeId>, edges: &[(u32, u32)]) -> Self {
        let mut adj = vec![Vec::new(); labels.len()];
        for &(a, b) in edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { labels, adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn label(&self, i: usize) -> NodeId {
        self.labels[i]
    }

    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges as index pairs `(a, b)`, `a < b`, ascending.
    pub fn edge_list(&self) -> Vec<(u32, u32)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| {
                list.iter()
                    .filter(move |&&b| (b as usize) > a)
                    .map(move |&b| (a as u32, b))
            })
            .collect()
    }

    /// `alive[i]` is false for the `count` highest-degree nodes, ties broken
    /// by ascending label.
    pub fn hub_mask(&self, count: usize) -> Vec<bool> {
        let mut alive = vec![true; self.num_nodes()];
        let mut order: Vec<usize> = (0..self.num_nodes()).collect();
        order.sort_by(|&a, &b| {
            self.degree(b)
                .cmp(&self.degree(a))
                .then(self.labels[a].cmp(&self.labels[b]))
        });
        for &i in order.iter().take(count) {
            alive[i] = false;
        }
        alive
    }

    /// Largest connected component among alive nodes, ties resolved toward
    /// the component holding the smallest label. Sorted node indices.
    pub fn largest_component(&self, alive: &[bool]) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut best: Vec<usize> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if !alive[start] || comp[start] != usize::MAX {
                continue;
            }
            let mut members = vec![start];
            comp[start] = start;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &u in &self.adj[v] {
                    let u = u as usize;
                    if alive[u] && comp[u] == usize::MAX {
                        comp[u] = start;
                        members.push(u);
                        queue.push_back(u);
                    }
                }
            }
            if members.len() > best.len() {
                best = members;
            }
        }
        best.sort_unstable();
        best
    }

    /// Sum of BFS distances from up to [`BFS_LANES`] `sources` to every alive
    /// node they reach, and how many (source, node) pairs that is. One bit
    /// per source travels through the graph, so each level is a single sweep
    /// over edges.
    pub(crate) fn bfs_distance_sums(
        &self,
        sources: &[usize],
        alive: &[bool],
        buf: &mut BfsBuffers,
    ) -> (u64, u64) {
        debug_assert!(sources.len() <= BFS_LANES);
        let BfsBuffers {
            seen,
            frontier,
            next,
        } = buf;
        seen.fill(ZERO);
        frontier.fill(ZERO);
        for (bit, &s) in sources.iter().enumerate() {
            seen[s][bit / 64] |= 1 << (bit % 64);
            frontier[s][bit / 64] |= 1 << (bit % 64);
        }
        let (mut sum, mut reached, mut depth) = (0u64, 0u64, 0u64);
        loop {
            depth += 1;
            next.fill(ZERO);
            for (v, bits) in frontier.iter().enumerate() {
                if *bits != ZERO {
                    for &u in &self.adj[v] {
                        let slot = &mut next[u as usize];
                        for w in 0..WORDS {
                            slot[w] |= bits[w];
                        }
                    }
                }
            }
            let mut grew = false;
            for u in 0..next.len() {
                if !alive[u] {
                    next[u] = ZERO;
                    continue;
                }
                let mut k = 0;
                for w in 0..WORDS {
                    let fresh = next[u][w] & !seen[u][w];
                    next[u][w] = fresh;
                    seen[u][w] |= fresh;
                    k += fresh.count_ones() as u64;
                }
                if k != 0 {
                    sum += depth * k;
                    reached += k;
                    grew = true;
                }
            }
            if !grew {
                return (sum, reached);
            }
            std::mem::swap(frontier, next);
        }
    }
}

const WORDS: usize = 4;
const ZERO: [u64; WORDS] = [0; WORDS];
/// Sources handled by one [`Graph::bfs_distance_sums`] sweep.
pub(crate) const BFS_LANES: usize = 64 * WORDS;

/// Scratch space for [`Graph::bfs_distance_sums`].
pub(crate) struct BfsBuffers {
    seen: Vec<[u64; WORDS]>,
    frontier: Vec<[u64; WORDS]>,
    next: Vec<[u64; WORDS]>,
}

impl BfsBuffers {
    pub(crate) fn new(n: usize) -> Self {
        BfsBuffers {
            seen: vec![ZERO; n],
            frontier: vec![ZERO; n],
            next: vec![ZERO; n],
        }
    }
}

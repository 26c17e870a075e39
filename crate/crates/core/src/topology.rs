//! Watts-Strogatz small-world contact graphs.
//!
//! Construction starts from a ring lattice in which every node is joined to
//! its `k/2` nearest neighbours on each side, then makes one rewiring pass:
//! each lattice edge, visited in a fixed order (offset-major, then node),
//! is moved to a uniformly drawn new endpoint with probability `p`. Rewiring
//! never introduces self-loops or parallel edges and never strands the far
//! endpoint of the edge being moved.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::SimError;

/// Node identifier; nodes are numbered `0..n`.
pub type NodeId = usize;

/// Parameters for small-world generation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmallWorldParams {
    /// Number of nodes.
    pub n: usize,
    /// Lattice degree: each node starts with `k` neighbours. Even, `k < n`.
    pub k: usize,
    /// Rewiring probability applied once per lattice edge, in `[0, 1]`.
    pub p: f64,
    /// Seed for the generator's private RNG.
    pub seed: u64,
}

impl SmallWorldParams {
    /// Checks the structural constraints on `n`, `k`, and `p`.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < 3 {
            return Err(SimError::InvalidParams(format!(
                "node count n must be at least 3, got {}",
                self.n
            )));
        }
        if self.k == 0 || !self.k.is_multiple_of(2) {
            return Err(SimError::InvalidParams(format!(
                "lattice degree k must be a positive even integer, got {}",
                self.k
            )));
        }
        if self.k >= self.n {
            return Err(SimError::InvalidParams(format!(
                "lattice degree k must be smaller than n, got k={} n={}",
                self.k, self.n
            )));
        }
        if !self.p.is_finite() || !(0.0..=1.0).contains(&self.p) {
            return Err(SimError::InvalidParams(format!(
                "rewiring probability p must lie in [0, 1], got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds a graph from an explicit edge list.
    ///
    /// Rejects self-loops, duplicate edges, and endpoints outside `0..n`.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::InvalidParams(
                "graph must have at least one node".into(),
            ));
        }
        let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(SimError::InvalidParams(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(SimError::InvalidParams(format!("self-loop at node {u}")));
            }
            if !sets[u].insert(v) {
                return Err(SimError::InvalidParams(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
            sets[v].insert(u);
        }
        Ok(Self::from_sets(sets))
    }

    fn from_sets(sets: Vec<BTreeSet<NodeId>>) -> Self {
        Topology {
            adjacency: sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        }
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Neighbours of `v` in ascending order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v]
    }

    /// Degree of `v`.
    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    /// Whether the edge `{u, v}` is present.
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// All edges as `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, neigh) in self.adjacency.iter().enumerate() {
            for &v in neigh {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Whether every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }
}

/// Maximum redraws when hunting for a valid rewiring target before the edge
/// is left in place.
const REWIRE_ATTEMPTS: usize = 64;

/// Generates a Watts-Strogatz small-world graph.
///
/// The ring lattice joins every node `i` to `(i + o) % n` for offsets
/// `o = 1..=k/2`. The rewiring pass then visits each lattice edge exactly
/// once, offset-major: for each offset and each node `i`, the edge
/// `{i, i + o}` is moved with probability `p` to `{i, c}` for a uniformly
/// drawn `c`, redrawing while `c` would create a self-loop or a duplicate.
/// The move is skipped when the far endpoint would be left with no edges or
/// no valid target exists after [`REWIRE_ATTEMPTS`] draws.
pub fn generate_small_world(params: &SmallWorldParams) -> Result<Topology, SimError> {
    params.validate()?;
    let n = params.n;
    let half_k = params.k / 2;

    let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for i in 0..n {
        for o in 1..=half_k {
            let j = (i + o) % n;
            sets[i].insert(j);
            sets[j].insert(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for o in 1..=half_k {
        for i in 0..n {
            if !rng.random_bool(params.p) {
                continue;
            }
            let old = (i + o) % n;
            debug_assert!(sets[i].contains(&old));
            if sets[old].len() <= 1 {
                continue;
            }
            for _ in 0..REWIRE_ATTEMPTS {
                let c = rng.random_range(0..n);
                if c == i || sets[i].contains(&c) {
                    continue;
                }
                sets[i].remove(&old);
                sets[old].remove(&i);
                sets[i].insert(c);
                sets[c].insert(i);
                break;
            }
        }
    }

    Ok(Topology::from_sets(sets))
}

/// Mean local clustering coefficient.
///
/// A node's local coefficient is the fraction of its neighbour pairs that
/// are themselves adjacent; nodes with fewer than two neighbours contribute
/// zero. The mean is taken over all nodes.
pub fn clustering_coefficient(t: &Topology) -> f64 {
    let n = t.node_count();
    let mut sum = 0.0;
    for v in 0..n {
        let neigh = t.neighbors(v);
        let d = neigh.len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for i in 0..d {
            for j in (i + 1)..d {
                if t.has_edge(neigh[i], neigh[j]) {
                    links += 1;
                }
            }
        }
        sum += links as f64 / (d as f64 * (d as f64 - 1.0) / 2.0);
    }
    sum / n as f64
}

/// Mean shortest-path length over all unordered node pairs, via one BFS per
/// source. Errors with [`SimError::DisconnectedGraph`] if any pair is
/// unreachable.
pub fn average_path_length(t: &Topology) -> Result<f64, SimError> {
    let n = t.node_count();
    if n < 2 {
        return Ok(0.0);
    }
    let mut total: u64 = 0;
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        let mut reached = 1usize;
        while let Some(u) = queue.pop_front() {
            for &v in t.neighbors(u) {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    reached += 1;
                    total += dist[v] as u64;
                    queue.push_back(v);
                }
            }
        }
        if reached < n {
            return Err(SimError::DisconnectedGraph);
        }
    }
    Ok(total as f64 / (n * (n - 1)) as f64)
}

//! Undirected simple graphs on dense node ids.
//!
//! Nodes are `0..n`. Edges are stored once as `(min, max)` pairs in sorted
//! order, which fixes the iteration order used everywhere downstream
//! (filtration weights, line graphs, serialization).

use std::fmt;

use crate::GraphError;

/// An unordered node pair `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range ids.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange { node: a.max(b), n });
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Self::from_sorted_unchecked(n, list))
    }

    /// Builds a graph from pairs, silently dropping self-loops and duplicates.
    pub fn from_pairs_lossy(n: usize, pairs: impl IntoIterator<Item = Edge>) -> Self {
        let mut list: Vec<Edge> =
            pairs.into_iter().filter(|&(a, b)| a != b && a < n && b < n).map(|(a, b)| (a.min(b), a.max(b))).collect();
        list.sort_unstable();
        list.dedup();
        Self::from_sorted_unchecked(n, list)
    }

    /// Builds a graph from a dense symmetric boolean matrix (upper triangle is read).
    pub fn from_adjacency(n: usize, adj: &[bool]) -> Self {
        assert_eq!(adj.len(), n * n, "adjacency must be n x n");
        let mut list = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if adj[i * n + j] {
                    list.push((i, j));
                }
            }
        }
        Self::from_sorted_unchecked(n, list)
    }

    fn from_sorted_unchecked(n: usize, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        Self { n, edges, adjacency }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_unchecked(n, Vec::new())
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::from_sorted_unchecked(n, edges)
    }

    pub fn path(n: usize) -> Self {
        Self::from_sorted_unchecked(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        let mut edges: Vec<Edge> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        edges.sort_unstable();
        Self::from_sorted_unchecked(n, edges)
    }

    /// Star with node 0 as the center.
    pub fn star(leaves: usize) -> Self {
        Self::from_sorted_unchecked(leaves + 1, (1..=leaves).map(|i| (0, i)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && a < self.n && b < self.n && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Position of edge `{a, b}` in [`Graph::edges`].
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    /// Dense row-major 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n * self.n];
        for &(a, b) in &self.edges {
            m[a * self.n + b] = 1.0;
            m[b * self.n + a] = 1.0;
        }
        m
    }

    /// Dense row-major boolean adjacency.
    pub fn adjacency_bool(&self) -> Vec<bool> {
        let mut m = vec![false; self.n * self.n];
        for &(a, b) in &self.edges {
            m[a * self.n + b] = true;
            m[b * self.n + a] = true;
        }
        m
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_pairs_lossy(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }

    /// Subgraph on the same node set keeping only edges with both endpoints in `keep`.
    pub fn induced_edges(&self, keep: &[bool]) -> Vec<Edge> {
        self.edges.iter().copied().filter(|&(a, b)| keep[a] && keep[b]).collect()
    }

    /// Same node set, restricted to the given edge subset.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Self {
        Self::from_pairs_lossy(self.n, edges)
    }

    /// Number of unordered node pairs, `n choose 2`.
    pub fn num_pairs(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn density(&self) -> f64 {
        match self.num_pairs() {
            0 => 0.0,
            p => self.edges.len() as f64 / p as f64,
        }
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={:?})", self.n, self.edges)
    }
}

/// A node ordering `g: V -> {1..n}`, stored in both directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeOrdering {
    /// `order[k]` is the node placed at (0-based) position `k`.
    order: Vec<usize>,
    /// `position[v]` is the 0-based position of node `v`.
    position: Vec<usize>,
}

impl NodeOrdering {
    /// Builds an ordering from the sequence of nodes in visit order.
    pub fn from_order(order: Vec<usize>) -> Result<Self, GraphError> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (k, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(GraphError::NotAPermutation);
            }
            position[v] = k;
        }
        Ok(Self { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect(), position: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 1-based rank `g(v)`.
    pub fn rank(&self, v: usize) -> usize {
        self.position[v] + 1
    }

    /// 0-based position of `v`; the row of the positional embedding table.
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn positions(&self) -> &[usize] {
        &self.position
    }

    /// The ordering after relabeling nodes by `perm` (node `v` becomes `perm[v]`).
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let order = self.order.iter().map(|&v| perm[v]).collect();
        Self::from_order(order).expect("relabeling preserves bijectivity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_edges() {
        assert!(matches!(Graph::new(3, [(1, 1)]), Err(GraphError::SelfLoop(1))));
        assert!(matches!(Graph::new(3, [(0, 1), (1, 0)]), Err(GraphError::DuplicateEdge(0, 1))));
        assert!(matches!(Graph::new(3, [(0, 3)]), Err(GraphError::NodeOutOfRange { .. })));
    }

    #[test]
    fn edges_sorted_by_min_max() {
        let g = Graph::new(4, [(3, 2), (1, 0), (2, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (2, 3)]);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.edge_index(3, 2), Some(2));
    }

    #[test]
    fn ordering_must_be_permutation() {
        assert!(NodeOrdering::from_order(vec![0, 0, 1]).is_err());
        let o = NodeOrdering::from_order(vec![2, 0, 1]).unwrap();
        assert_eq!(o.rank(2), 1);
        assert_eq!(o.rank(1), 3);
    }
}

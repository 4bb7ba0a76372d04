//! Classical graph algorithms: traversal, line graphs, tree shape tests,
//! edge betweenness.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Edge, Graph, NodeOrdering};
use crate::GraphError;

pub fn is_connected(g: &Graph) -> bool {
    if g.n() <= 1 {
        return true;
    }
    let mut seen = vec![false; g.n()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == g.n()
}

/// Component label per node, labels numbered in order of their smallest node.
pub fn connected_components(g: &Graph) -> Vec<usize> {
    let mut label = vec![usize::MAX; g.n()];
    let mut next = 0;
    for s in 0..g.n() {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in g.neighbors(v) {
                if label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Depth-first preorder from `root`; each node's unvisited neighbors are
/// explored in an order shuffled by `rng`.
pub fn dfs_ordering<R: Rng + ?Sized>(g: &Graph, root: usize, rng: &mut R) -> Result<NodeOrdering, GraphError> {
    if root >= g.n() {
        return Err(GraphError::NodeOutOfRange { node: root, n: g.n() });
    }
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let mut visited = vec![false; g.n()];
    let mut order = Vec::with_capacity(g.n());
    let shuffled = |v: usize, rng: &mut R| {
        let mut nb = g.neighbors(v).to_vec();
        nb.shuffle(rng);
        nb
    };
    visited[root] = true;
    order.push(root);
    let mut stack = vec![(root, shuffled(root, rng), 0usize)];
    while let Some(frame) = stack.last_mut() {
        let (_, nbrs, cursor) = frame;
        if *cursor == nbrs.len() {
            stack.pop();
            continue;
        }
        let w = nbrs[*cursor];
        *cursor += 1;
        if !visited[w] {
            visited[w] = true;
            order.push(w);
            let nb = shuffled(w, rng);
            stack.push((w, nb, 0));
        }
    }
    NodeOrdering::from_order(order)
}

/// Line graph: node `k` stands for `g.edges()[k]`; returns the edge map too.
pub fn line_graph(g: &Graph) -> Result<(Graph, Vec<Edge>), GraphError> {
    if g.num_edges() == 0 {
        return Err(GraphError::NoEdges);
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for (k, &(a, b)) in g.edges().iter().enumerate() {
        incident[a].push(k);
        incident[b].push(k);
    }
    let mut pairs = Vec::new();
    for inc in &incident {
        for (x, &k) in inc.iter().enumerate() {
            for &l in &inc[x + 1..] {
                pairs.push((k, l));
            }
        }
    }
    // Two distinct edges of a simple graph share at most one endpoint, so no duplicates.
    let lg = Graph::new(g.num_edges(), pairs)?;
    Ok((lg, g.edges().to_vec()))
}

/// Breadth-first hop distances from `source`; `usize::MAX` for unreachable nodes.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

pub fn is_tree(g: &Graph) -> bool {
    g.n() >= 1 && g.num_edges() + 1 == g.n() && is_connected(g)
}

/// Removes every node of degree <= 1 from the node subset `alive`.
fn strip_leaves(g: &Graph, alive: &mut [bool]) {
    let deg: Vec<usize> = (0..g.n()).map(|v| g.neighbors(v).iter().filter(|&&w| alive[w]).count()).collect();
    for v in 0..g.n() {
        if alive[v] && deg[v] <= 1 {
            alive[v] = false;
        }
    }
}

/// A caterpillar-of-caterpillars: a tree that becomes a path (or nothing)
/// after stripping leaves twice.
pub fn is_lobster(g: &Graph) -> bool {
    if !is_tree(g) {
        return false;
    }
    let mut alive = vec![true; g.n()];
    strip_leaves(g, &mut alive);
    strip_leaves(g, &mut alive);
    // A forest restricted to the survivors is a path iff every survivor has
    // at most two surviving neighbors (survivors of a tree stay connected).
    (0..g.n()).filter(|&v| alive[v]).all(|v| g.neighbors(v).iter().filter(|&&w| alive[w]).count() <= 2)
}

/// Edge betweenness `sum_{s<t} sigma(s,t|e) / sigma(s,t)`, aligned with `g.edges()`.
pub fn edge_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut score = vec![0.0; g.num_edges()];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        sigma.iter_mut().for_each(|x| *x = 0.0);
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        delta.iter_mut().for_each(|x| *x = 0.0);
        preds.iter_mut().for_each(Vec::clear);
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut stack = Vec::with_capacity(n);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                let e = g.edge_index(v, w).expect("predecessor is a neighbor");
                score[e] += c;
                delta[v] += c;
            }
        }
    }
    // Every unordered pair was counted from both endpoints.
    score.iter_mut().for_each(|x| *x /= 2.0);
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn dfs_on_path_from_endpoint_is_unique() {
        let g = Graph::path(3);
        for s in 0..10 {
            let o = dfs_ordering(&g, 0, &mut rng(s)).unwrap();
            assert_eq!(o.order(), &[0, 1, 2]);
        }
    }

    #[test]
    fn dfs_on_triangle() {
        let g = Graph::complete(3);
        let mut seen = std::collections::HashSet::new();
        for s in 0..50 {
            let o = dfs_ordering(&g, 0, &mut rng(s)).unwrap();
            assert_eq!(o.rank(0), 1);
            seen.insert(o.order().to_vec());
        }
        assert_eq!(seen.len(), 2, "both orientations should be reachable");
    }

    #[test]
    fn dfs_rejects_disconnected() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let err = dfs_ordering(&g, 0, &mut rng(0)).unwrap_err();
        assert_eq!(err.to_string(), "graph not connected");
    }

    #[test]
    fn line_graph_identities() {
        let (lg, _) = line_graph(&Graph::path(4)).unwrap();
        assert_eq!(lg, Graph::path(3));
        let (lg, _) = line_graph(&Graph::complete(3)).unwrap();
        assert_eq!(lg, Graph::complete(3));
        let (lg, _) = line_graph(&Graph::star(3)).unwrap();
        assert_eq!(lg, Graph::complete(3));
        assert!(line_graph(&Graph::empty(3)).is_err());
    }

    #[test]
    fn lobster_examples() {
        assert!(is_lobster(&Graph::path(10)));
        assert!(is_lobster(&Graph::star(5)));
        assert!(is_lobster(&Graph::empty(1)));
        assert!(!is_lobster(&Graph::cycle(5)));
        // Spider with three legs of length 3 is not a lobster.
        let spider = Graph::new(10, [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (0, 7), (7, 8), (8, 9)]).unwrap();
        assert!(!is_lobster(&spider));
    }

    #[test]
    fn betweenness_on_path() {
        let b = edge_betweenness(&Graph::path(3));
        assert_eq!(b, vec![2.0, 2.0]);
        let b = edge_betweenness(&Graph::path(4));
        assert_eq!(b, vec![3.0, 4.0, 3.0]);
    }
}

#![allow(dead_code)]

use anfm_graph::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus independent extra edges with probability `p`.
pub fn random_connected(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = perm[rng.random_range(0..k)];
        edges.push((parent, perm[k]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_pairs_lossy(n, edges)
}

pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_pairs_lossy(n, edges)
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Tree from a Prüfer sequence over `0..seq.len() + 2`.
pub fn prufer_tree(seq: &[usize]) -> Graph {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    seq.iter().for_each(|&x| degree[x] += 1);
    let mut edges = Vec::new();
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    Graph::new(n, edges).unwrap()
}

/// Brute-force connectivity of the subgraph induced by `nodes`.
pub fn induced_connected(g: &Graph, nodes: &[usize]) -> bool {
    if nodes.is_empty() {
        return true;
    }
    let inside = |v: usize| nodes.contains(&v);
    let mut seen = vec![nodes[0]];
    let mut frontier = vec![nodes[0]];
    while let Some(v) = frontier.pop() {
        for w in 0..g.n() {
            if inside(w) && g.has_edge(v, w) && !seen.contains(&w) {
                seen.push(w);
                frontier.push(w);
            }
        }
    }
    seen.len() == nodes.len()
}

//! Per-graph descriptor vectors: degree, clustering and spectral histograms
//! and mean graphlet-orbit counts.

use anfm_graph::{eigh, sym_normalized_laplacian, Graph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Orbits of the connected graphlets on 2 to 4 nodes.
pub const ORBITS: usize = 15;
pub const CLUSTERING_BINS: usize = 100;
pub const SPECTRAL_BINS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    Degree,
    Clustering,
    Orbit,
    Spectral,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 4] =
        [DescriptorKind::Degree, DescriptorKind::Clustering, DescriptorKind::Orbit, DescriptorKind::Spectral];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Degree => "degree",
            DescriptorKind::Clustering => "clustering",
            DescriptorKind::Orbit => "orbit",
            DescriptorKind::Spectral => "spectral",
        }
    }
}

/// One graph's descriptor vector.
pub type Descriptor = Vec<f64>;

fn normalize(mut h: Vec<f64>) -> Vec<f64> {
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        h.iter_mut().for_each(|x| *x /= total);
    }
    h
}

fn bin(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let k = ((x - lo) / (hi - lo) * bins as f64).floor();
    (k.max(0.0) as usize).min(bins - 1)
}

/// Normalized histogram of node degrees over `0..=max_degree`.
pub fn degree_histogram(g: &Graph, max_degree: usize) -> Descriptor {
    let mut h = vec![0.0; max_degree + 1];
    for d in g.degrees() {
        h[d.min(max_degree)] += 1.0;
    }
    normalize(h)
}

/// Local clustering coefficient of every node (0 for degree below 2).
pub fn clustering_coefficients(g: &Graph) -> Vec<f64> {
    let mut marked = vec![false; g.n()];
    (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            nb.iter().for_each(|&u| marked[u] = true);
            let links: usize = nb.iter().map(|&u| g.neighbors(u).iter().filter(|&&w| marked[w]).count()).sum();
            nb.iter().for_each(|&u| marked[u] = false);
            links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Normalized histogram of local clustering coefficients, 100 bins on [0, 1].
pub fn clustering_histogram(g: &Graph) -> Descriptor {
    let mut h = vec![0.0; CLUSTERING_BINS];
    for c in clustering_coefficients(g) {
        h[bin(c, 0.0, 1.0, CLUSTERING_BINS)] += 1.0;
    }
    normalize(h)
}

/// Normalized histogram of normalized-Laplacian eigenvalues, 200 bins on [0, 2].
pub fn spectral_histogram(g: &Graph) -> Descriptor {
    let mut h = vec![0.0; SPECTRAL_BINS];
    if g.n() > 0 {
        let eig = eigh(&sym_normalized_laplacian(g)).expect("Jacobi rotations converge on symmetric matrices");
        for &l in &eig.values {
            h[bin(l, 0.0, 2.0, SPECTRAL_BINS)] += 1.0;
        }
    }
    normalize(h)
}

/// Orbit of each node of a connected induced subgraph on `nodes`.
fn classify(g: &Graph, nodes: &[usize], counts: &mut [[u64; ORBITS]]) {
    let k = nodes.len();
    let mut deg = [0usize; 4];
    let mut edges = 0;
    for a in 0..k {
        for b in (a + 1)..k {
            if g.has_edge(nodes[a], nodes[b]) {
                deg[a] += 1;
                deg[b] += 1;
                edges += 1;
            }
        }
    }
    let has_hub = deg[..k].contains(&3);
    for (i, &v) in nodes.iter().enumerate() {
        let orbit = match (k, edges, deg[i]) {
            (2, _, _) => 0,
            (3, 2, 1) => 1,
            (3, 2, _) => 2,
            (3, _, _) => 3,
            (4, 3, d) if has_hub => {
                if d == 3 {
                    7
                } else {
                    6
                }
            }
            (4, 3, 1) => 4,
            (4, 3, _) => 5,
            (4, 4, d) if has_hub => match d {
                1 => 9,
                2 => 10,
                _ => 11,
            },
            (4, 4, _) => 8,
            (4, 5, 2) => 12,
            (4, 5, _) => 13,
            _ => 14,
        };
        counts[v][orbit] += 1;
    }
}

/// Per-node counts of the 15 orbits, enumerating every connected induced
/// subgraph on 2 to 4 nodes once (ESU enumeration).
pub fn orbit_counts(g: &Graph) -> Vec<[u64; ORBITS]> {
    let mut counts = vec![[0u64; ORBITS]; g.n()];
    let mut sub = Vec::with_capacity(4);
    for v in 0..g.n() {
        sub.push(v);
        let ext: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| u > v).collect();
        extend(g, &mut sub, ext, v, &mut counts);
        sub.pop();
    }
    counts
}

fn extend(g: &Graph, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize, counts: &mut [[u64; ORBITS]]) {
    if sub.len() >= 2 {
        classify(g, sub, counts);
    }
    if sub.len() == 4 {
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in g.neighbors(w) {
            let exclusive = u > root && !sub.contains(&u) && !sub.iter().any(|&s| g.has_edge(s, u));
            if exclusive && !next.contains(&u) {
                next.push(u);
            }
        }
        sub.push(w);
        extend(g, sub, next, root, counts);
        sub.pop();
    }
}

/// Mean orbit-count vector over the nodes.
pub fn orbit_descriptor(g: &Graph) -> Descriptor {
    let mut mean = vec![0.0; ORBITS];
    if g.n() == 0 {
        return mean;
    }
    for row in orbit_counts(g) {
        mean.iter_mut().zip(row).for_each(|(m, c)| *m += c as f64);
    }
    mean.iter_mut().for_each(|m| *m /= g.n() as f64);
    mean
}

/// Descriptors of two graph collections; degree histograms share the largest
/// degree found in either.
pub fn descriptor_sets(kind: DescriptorKind, a: &[Graph], b: &[Graph]) -> (Vec<Descriptor>, Vec<Descriptor>) {
    let max_degree = a.iter().chain(b).flat_map(|g| g.degrees()).max().unwrap_or(0);
    let one = |g: &Graph| match kind {
        DescriptorKind::Degree => degree_histogram(g, max_degree),
        DescriptorKind::Clustering => clustering_histogram(g),
        DescriptorKind::Orbit => orbit_descriptor(g),
        DescriptorKind::Spectral => spectral_histogram(g),
    };
    (a.par_iter().map(one).collect(), b.par_iter().map(one).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_clustering_is_all_in_the_top_bin() {
        let h = clustering_histogram(&Graph::complete(3));
        assert_eq!(h[CLUSTERING_BINS - 1], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn star_clustering_is_all_zero() {
        let h = clustering_histogram(&Graph::star(3));
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn k4_orbits() {
        let counts = orbit_counts(&Graph::complete(4));
        // Every triple is a triangle and the only 4-set is K4 itself.
        assert_eq!(counts[0], [3, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn path_orbits() {
        let counts = orbit_counts(&Graph::path(4));
        assert_eq!(counts[0], [1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(counts[1], [2, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn spectral_histogram_sums_to_one() {
        let h = spectral_histogram(&Graph::cycle(6));
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // C6 normalized spectrum: 0, 0.5, 0.5, 1.5, 1.5, 2.
        assert_eq!(h[0], 1.0 / 6.0);
        assert_eq!(h[SPECTRAL_BINS - 1], 1.0 / 6.0);
    }

    #[test]
    fn degree_histogram_uses_the_shared_cap() {
        let (a, b) = descriptor_sets(DescriptorKind::Degree, &[Graph::path(3)], &[Graph::star(4)]);
        assert_eq!(a[0], vec![0.0, 2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
        assert_eq!(b[0].len(), 5);
    }
}

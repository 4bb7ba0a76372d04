use delaunator::{triangulate, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, DatasetSpec, Family, LobsterParams, SbmParams};
use crate::algo::is_connected;
use crate::graph::Graph;

const MAX_REJECTIONS: usize = 10_000;

/// Delaunay triangulation of `points` uniform points in the unit square.
pub fn delaunay_graph<R: Rng + ?Sized>(points: usize, rng: &mut R) -> Graph {
    loop {
        let pts: Vec<Point> = (0..points).map(|_| Point { x: rng.random(), y: rng.random() }).collect();
        let tri = triangulate(&pts);
        if tri.triangles.is_empty() {
            // All points collinear; measure zero, draw again.
            continue;
        }
        let pairs = tri.triangles.chunks_exact(3).flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])]);
        return Graph::from_pairs_lossy(points, pairs);
    }
}

/// Stochastic block model with uniformly drawn community count and sizes.
pub fn sbm_graph<R: Rng + ?Sized>(p: &SbmParams, rng: &mut R) -> Graph {
    let k = rng.random_range(p.min_communities..=p.max_communities);
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(p.min_size..=p.max_size)).collect();
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let n = block.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = if block[i] == block[j] { p.p_intra } else { p.p_inter };
            if rng.random::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    Graph::from_pairs_lossy(n, edges)
}

/// Backbone path of random length with two rounds of geometric leaf attachment.
pub fn random_lobster<R: Rng + ?Sized>(p: &LobsterParams, rng: &mut R) -> Graph {
    let backbone = (2.0 * rng.random::<f64>() * p.mean_backbone + 0.5) as usize;
    let mut edges: Vec<(usize, usize)> = (1..backbone).map(|i| (i - 1, i)).collect();
    let mut next = backbone;
    for v in 0..backbone {
        while rng.random::<f64>() < p.p1 {
            let cat = next;
            next += 1;
            edges.push((v, cat));
            while rng.random::<f64>() < p.p2 {
                edges.push((cat, next));
                next += 1;
            }
        }
    }
    Graph::from_pairs_lossy(next, edges)
}

/// One connected graph of the spec's family, redrawn until it is connected
/// and inside the family's size window.
pub fn sample_family(spec: &DatasetSpec, seed: u64) -> Result<Graph, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let g = match spec.family {
            Family::Planar => delaunay_graph(spec.planar.points, &mut rng),
            Family::Sbm => sbm_graph(&spec.sbm, &mut rng),
            Family::Lobster => {
                let g = random_lobster(&spec.lobster, &mut rng);
                if g.n() < spec.lobster.min_nodes || g.n() > spec.lobster.max_nodes {
                    continue;
                }
                g
            }
        };
        if g.n() > 0 && is_connected(&g) {
            return Ok(g);
        }
    }
    Err(DatasetError::RejectionLimit { family: spec.family, attempts: MAX_REJECTIONS })
}

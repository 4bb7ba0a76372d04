//! Dense symmetric eigen-decomposition (cyclic Jacobi) and the spectral and
//! structural node features fed to filtrations and the model.

use crate::algo::is_connected;
use crate::graph::Graph;
use crate::GraphError;

pub const LAP_PE_DIM: usize = 4;
pub const RWPE_DIM: usize = 20;
/// Triangles, 4-cycles, 5-cycles.
pub const CYCLE_KINDS: usize = 3;

const SYMMETRY_TOL: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100;

/// Dense row-major square matrix, expected (and checked by [`eigh`]) to be symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl SymMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "matrix data must be dim x dim");
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(dim, vec![0.0; dim * dim])
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    fn frobenius(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Row-major `dim x dim`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl EigenPairs {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.vectors[i * self.dim + k]).collect()
    }
}

/// `I - D^{-1/2} A D^{-1/2}`; isolated nodes get diagonal 1 and zero off-diagonals.
pub fn sym_normalized_laplacian(g: &Graph) -> SymMatrix {
    let n = g.n();
    let mut m = SymMatrix::identity(n);
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() }).collect();
    for &(a, b) in g.edges() {
        let w = -inv_sqrt[a] * inv_sqrt[b];
        m.set(a, b, w);
        m.set(b, a, w);
    }
    m
}

/// Combinatorial Laplacian `D - A`.
pub fn combinatorial_laplacian(g: &Graph) -> SymMatrix {
    let n = g.n();
    let mut m = SymMatrix::zeros(n);
    for v in 0..n {
        m.set(v, v, g.degree(v) as f64);
    }
    for &(a, b) in g.edges() {
        m.set(a, b, -1.0);
        m.set(b, a, -1.0);
    }
    m
}

/// Full eigen-decomposition by cyclic Jacobi rotations.
pub fn eigh(m: &SymMatrix) -> Result<EigenPairs, GraphError> {
    let n = m.dim;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(GraphError::NotSymmetric(i, j));
            }
        }
    }
    let mut a = m.entries.clone();
    let mut v = SymMatrix::identity(n).entries;
    let tol = 1e-10 * m.frobenius();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = idx.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in idx.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + col] = v[i * n + k];
        }
    }
    Ok(EigenPairs { values, vectors, dim: n })
}

/// Flips `v` so that its first entry with magnitude above 1e-9 is positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(&x) = v.iter().find(|x| x.abs() > SIGN_TOL) {
        if x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

/// Eigenvector of the second-smallest eigenvalue of the normalized Laplacian.
pub fn fiedler_vector(g: &Graph) -> Result<Vec<f64>, GraphError> {
    if g.n() < 2 || !is_connected(g) {
        return Err(GraphError::FiedlerUndefined);
    }
    let pairs = eigh(&sym_normalized_laplacian(g))?;
    let mut v = pairs.vector(1);
    fix_sign(&mut v);
    Ok(v)
}

/// Per-node and per-graph structural features of one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub lap_pe: Vec<[f64; LAP_PE_DIM]>,
    pub rwpe: Vec<[f64; RWPE_DIM]>,
    /// Triangles, 4-cycles and 5-cycles through each node.
    pub cycle_counts: Vec<[u64; CYCLE_KINDS]>,
    pub graph_cycle_totals: [u64; CYCLE_KINDS],
}

impl NodeFeatures {
    pub fn n(&self) -> usize {
        self.rwpe.len()
    }
}

/// Dense `A * M` for a 0/1 adjacency given by neighbor lists.
fn adj_times(g: &Graph, m: &[f64]) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for &l in g.neighbors(i) {
            let src = &m[l * n..(l + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
    out
}

fn lap_pe(g: &Graph) -> Vec<[f64; LAP_PE_DIM]> {
    let n = g.n();
    let mut pe = vec![[0.0; LAP_PE_DIM]; n];
    if n == 0 {
        return pe;
    }
    let pairs = eigh(&combinatorial_laplacian(g)).expect("Laplacian is symmetric");
    let first_nonzero = pairs.values.iter().position(|&x| x > 1e-8).unwrap_or(n);
    for (slot, k) in (first_nonzero..n).take(LAP_PE_DIM).enumerate() {
        let mut v = pairs.vector(k);
        fix_sign(&mut v);
        for i in 0..n {
            pe[i][slot] = v[i];
        }
    }
    pe
}

fn rwpe(g: &Graph) -> Vec<[f64; RWPE_DIM]> {
    let n = g.n();
    let inv_deg: Vec<f64> = g.degrees().iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
    let mut out = vec![[0.0; RWPE_DIM]; n];
    // cur = P^k with P = D^{-1} A, advanced as cur <- cur * P.
    let mut cur = vec![0.0; n * n];
    for i in 0..n {
        cur[i * n + i] = 1.0;
    }
    let mut next = vec![0.0; n * n];
    for k in 0..RWPE_DIM {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            for l in 0..n {
                let c = cur[i * n + l];
                if c == 0.0 {
                    continue;
                }
                let w = c * inv_deg[l];
                for &j in g.neighbors(l) {
                    next[i * n + j] += w;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        for i in 0..n {
            out[i][k] = cur[i * n + i].clamp(0.0, 1.0);
        }
    }
    out
}

/// Per-node counts of simple 3-, 4- and 5-cycles from closed-walk counts
/// with the non-simple walks subtracted.
pub fn cycle_counts(g: &Graph) -> Vec<[u64; CYCLE_KINDS]> {
    let n = g.n();
    let a1 = g.adjacency_matrix();
    let a2 = adj_times(g, &a1);
    let a3 = adj_times(g, &a2);
    let a4 = adj_times(g, &a3);
    let a5 = adj_times(g, &a4);
    let d: Vec<f64> = g.degrees().iter().map(|&x| x as f64).collect();
    let diag = |m: &[f64], i: usize| m[i * n + i];
    (0..n)
        .map(|i| {
            let w3 = diag(&a3, i);
            let tri = w3 / 2.0;

            let nb_excess: f64 = g.neighbors(i).iter().map(|&j| d[j] - 1.0).sum();
            let c4 = (diag(&a4, i) - d[i] * d[i] - nb_excess) / 2.0;

            // Closed 5-walks through a triangle containing i: a triangle walk
            // with one back-and-forth step inserted, adjacent insertions that
            // coincide removed (3 per directed triangle).
            let through_i: f64 =
                w3 * (2.0 * d[i] - 3.0) + 2.0 * g.neighbors(i).iter().map(|&b| a2[i * n + b] * d[b]).sum::<f64>();
            // Closed 5-walks i -> u -> (triangle at u avoiding i) -> u -> i.
            let pendant: f64 = g.neighbors(i).iter().map(|&u| diag(&a3, u) - 2.0 * a2[i * n + u]).sum();
            let c5 = (diag(&a5, i) - through_i - pendant) / 2.0;

            [tri, c4, c5].map(|x| {
                debug_assert!(x > -0.5, "negative cycle count {x}");
                x.round().max(0.0) as u64
            })
        })
        .collect()
}

pub fn node_features(g: &Graph) -> NodeFeatures {
    let cycle_counts = cycle_counts(g);
    let mut graph_cycle_totals = [0u64; CYCLE_KINDS];
    for (k, len) in [3u64, 4, 5].into_iter().enumerate() {
        graph_cycle_totals[k] = cycle_counts.iter().map(|c| c[k]).sum::<u64>() / len;
    }
    NodeFeatures { lap_pe: lap_pe(g), rwpe: rwpe(g), cycle_counts, graph_cycle_totals }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn laplacian_examples() {
        let l = sym_normalized_laplacian(&Graph::path(2));
        assert_eq!(l.entries, vec![1.0, -1.0, -1.0, 1.0]);
        let e = eigh(&l).unwrap();
        assert!(close(e.values[0], 0.0, 1e-12) && close(e.values[1], 2.0, 1e-12));
        let e = eigh(&sym_normalized_laplacian(&Graph::path(3))).unwrap();
        for (x, y) in e.values.iter().zip([0.0, 1.0, 2.0]) {
            assert!(close(*x, y, 1e-12));
        }
        assert_eq!(sym_normalized_laplacian(&Graph::empty(3)), SymMatrix::identity(3));
    }

    #[test]
    fn eigh_two_by_two() {
        let e = eigh(&SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!(close(e.values[0], 1.0, 1e-12) && close(e.values[1], 3.0, 1e-12));
        let e = eigh(&SymMatrix::identity(4)).unwrap();
        assert!(e.values.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn eigh_rejects_asymmetric() {
        let err = eigh(&SymMatrix::new(2, vec![1.0, 2.0, 0.0, 1.0])).unwrap_err();
        assert_eq!(err, GraphError::NotSymmetric(0, 1));
    }

    #[test]
    fn fiedler_examples() {
        let s = 1.0 / 2f64.sqrt();
        let v = fiedler_vector(&Graph::path(3)).unwrap();
        for (x, y) in v.iter().zip([s, 0.0, -s]) {
            assert!(close(*x, y, 1e-10), "{v:?}");
        }
        let v = fiedler_vector(&Graph::path(2)).unwrap();
        assert!(close(v[0], s, 1e-12) && close(v[1], -s, 1e-12));
        let err = fiedler_vector(&Graph::empty(3)).unwrap_err();
        assert!(err.to_string().starts_with("Fiedler undefined"));
    }

    #[test]
    fn rwpe_on_an_edge_alternates() {
        let f = node_features(&Graph::path(2));
        for row in &f.rwpe {
            for (k, &x) in row.iter().enumerate() {
                assert_eq!(x, if k % 2 == 0 { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn cycle_counts_on_cliques() {
        let f = node_features(&Graph::complete(3));
        assert!(f.cycle_counts.iter().all(|c| *c == [1, 0, 0]));
        assert_eq!(f.graph_cycle_totals, [1, 0, 0]);
        let f = node_features(&Graph::complete(4));
        assert!(f.cycle_counts.iter().all(|c| *c == [3, 3, 0]));
        assert_eq!(f.graph_cycle_totals, [4, 3, 0]);
        let f = node_features(&Graph::complete(5));
        assert!(f.cycle_counts.iter().all(|c| *c == [6, 12, 12]));
        assert_eq!(f.graph_cycle_totals, [10, 15, 12]);
        let f = node_features(&Graph::cycle(5));
        assert_eq!(f.graph_cycle_totals, [0, 0, 1]);
    }

    #[test]
    fn empty_graph_features_are_zero() {
        let f = node_features(&Graph::empty(3));
        assert!(f.lap_pe.iter().flatten().all(|&x| x == 0.0));
        assert!(f.rwpe.iter().flatten().all(|&x| x == 0.0));
        assert!(f.cycle_counts.iter().flatten().all(|&x| x == 0));
    }
}

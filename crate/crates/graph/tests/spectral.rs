mod common;

use anfm_graph::spectral::combinatorial_laplacian;
use anfm_graph::{eigh, fiedler_vector, node_features, sym_normalized_laplacian, Graph, SymMatrix};
use common::{random_connected, random_graph, random_permutation, rng};
use proptest::prelude::*;
use rand::Rng;

fn random_symmetric(n: usize, r: &mut impl Rng) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let x = r.random_range(-1.0..1.0);
            m.set(i, j, x);
            m.set(j, i, x);
        }
    }
    m
}

#[test]
fn eigh_reconstructs_random_matrices() {
    let mut r = rng(1);
    for n in [1, 2, 5, 8, 8, 8, 13] {
        let m = random_symmetric(n, &mut r);
        let e = eigh(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..n {
            for j in 0..n {
                let rec: f64 = (0..n).map(|k| e.vectors[i * n + k] * e.values[k] * e.vectors[j * n + k]).sum();
                assert!((rec - m.get(i, j)).abs() < 1e-8, "reconstruction ({i},{j})");
                let gram: f64 = (0..n).map(|k| e.vectors[k * n + i] * e.vectors[k * n + j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((gram - id).abs() < 1e-8, "orthonormality ({i},{j})");
            }
        }
        for k in 0..n {
            let v = e.vector(k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| m.get(i, j) * v[j]).sum();
                assert!((av - e.values[k] * v[i]).abs() < 1e-7 * n as f64);
            }
        }
    }
}

#[test]
fn fiedler_vector_residual_and_sign() {
    let mut r = rng(2);
    for _ in 0..50 {
        let n = r.random_range(2..20);
        let g = random_connected(n, 0.2, &mut r);
        let l = sym_normalized_laplacian(&g);
        let e = eigh(&l).unwrap();
        let v = fiedler_vector(&g).unwrap();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        for i in 0..n {
            let lv: f64 = (0..n).map(|j| l.get(i, j) * v[j]).sum();
            assert!((lv - e.values[1] * v[i]).abs() < 1e-7);
        }
        let first = v.iter().find(|x| x.abs() > 1e-9).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn fiedler_on_degenerate_cycle() {
    let g = Graph::cycle(4);
    let l = sym_normalized_laplacian(&g);
    let v = fiedler_vector(&g).unwrap();
    for i in 0..4 {
        let lv: f64 = (0..4).map(|j| l.get(i, j) * v[j]).sum();
        assert!((lv - v[i]).abs() < 1e-9, "eigenvalue 1 residual");
    }
    assert!(*v.iter().find(|x| x.abs() > 1e-9).unwrap() > 0.0);
}

fn brute_cycles(g: &Graph, len: usize) -> Vec<u64> {
    // Count simple cycles of the given length through each node by
    // enumerating node sequences starting at their smallest node.
    let n = g.n();
    let mut per_node = vec![0u64; n];
    fn extend(g: &Graph, path: &mut Vec<usize>, len: usize, per_node: &mut [u64]) {
        let start = path[0];
        let last = *path.last().unwrap();
        if path.len() == len {
            // Each cycle is seen in both directions.
            if g.has_edge(last, start) && path[1] < path[len - 1] {
                path.iter().for_each(|&v| per_node[v] += 1);
            }
            return;
        }
        for &w in g.neighbors(last) {
            if w > start && !path.contains(&w) {
                path.push(w);
                extend(g, path, len, per_node);
                path.pop();
            }
        }
    }
    for s in 0..n {
        extend(g, &mut vec![s], len, &mut per_node);
    }
    per_node
}

#[test]
fn cycle_counts_match_enumeration() {
    let mut r = rng(3);
    for _ in 0..150 {
        let n = r.random_range(1..=10);
        let p = r.random_range(0.1..0.9);
        let g = random_graph(n, p, &mut r);
        let f = node_features(&g);
        for (k, len) in [3, 4, 5].into_iter().enumerate() {
            let brute = brute_cycles(&g, len);
            let got: Vec<u64> = f.cycle_counts.iter().map(|c| c[k]).collect();
            assert_eq!(got, brute, "{len}-cycles in {g:?}");
            assert_eq!(f.graph_cycle_totals[k], brute.iter().sum::<u64>() / len as u64);
        }
    }
}

#[test]
fn triangle_counts_match_triple_enumeration() {
    let mut r = rng(4);
    for _ in 0..100 {
        let n = r.random_range(3..=12);
        let g = random_graph(n, 0.4, &mut r);
        let f = node_features(&g);
        for v in 0..n {
            let mut count = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    if a != v && b != v && g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b) {
                        count += 1;
                    }
                }
            }
            assert_eq!(f.cycle_counts[v][0], count);
        }
    }
}

#[test]
fn normalized_laplacian_spectrum_in_range() {
    let mut r = rng(5);
    for _ in 0..50 {
        let n = r.random_range(1..25);
        let g = random_graph(n, 0.3, &mut r);
        let e = eigh(&sym_normalized_laplacian(&g)).unwrap();
        assert!(e.values.iter().all(|&x| (-1e-9..=2.0 + 1e-9).contains(&x)), "{:?}", e.values);
    }
}

/// Graphs whose combinatorial Laplacian has a simple spectrum, so the
/// positional encodings are determined up to the sign rule.
fn has_simple_spectrum(g: &Graph) -> bool {
    let e = eigh(&combinatorial_laplacian(g)).unwrap();
    e.values.windows(2).all(|w| w[1] - w[0] > 1e-6)
}

#[test]
fn node_features_are_permutation_equivariant() {
    let mut r = rng(6);
    let mut checked_pe = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=12);
        let g = random_connected(n, 0.25, &mut r);
        let perm = random_permutation(n, &mut r);
        let h = g.relabel(&perm);
        let fg = node_features(&g);
        let fh = node_features(&h);
        assert_eq!(fg.graph_cycle_totals, fh.graph_cycle_totals);
        for v in 0..n {
            let w = perm[v];
            assert_eq!(fg.cycle_counts[v], fh.cycle_counts[w]);
            for k in 0..fg.rwpe[v].len() {
                assert!((fg.rwpe[v][k] - fh.rwpe[w][k]).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&fg.rwpe[v][k]));
            }
        }
        if has_simple_spectrum(&g) {
            checked_pe += 1;
            for k in 0..4 {
                let a: Vec<f64> = (0..n).map(|v| fg.lap_pe[v][k]).collect();
                let b: Vec<f64> = (0..n).map(|v| fh.lap_pe[perm[v]][k]).collect();
                let same = a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-7);
                let flipped = a.iter().zip(&b).all(|(x, y)| (x + y).abs() < 1e-7);
                assert!(same || flipped, "lap_pe column {k} differs beyond sign");
            }
        }
    }
    assert!(checked_pe > 20);
}

proptest! {
    #[test]
    fn rwpe_first_step_is_zero_and_second_is_inverse_degree_sum(seed in any::<u64>(), n in 1usize..12) {
        let g = random_graph(n, 0.4, &mut rng(seed));
        let f = node_features(&g);
        for v in 0..n {
            prop_assert_eq!(f.rwpe[v][0], 0.0);
            let expected: f64 = if g.degree(v) == 0 {
                0.0
            } else {
                g.neighbors(v).iter().map(|&w| 1.0 / (g.degree(v) * g.degree(w)) as f64).sum()
            };
            prop_assert!((f.rwpe[v][1] - expected).abs() < 1e-12);
        }
    }
}

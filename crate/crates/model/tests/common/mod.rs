#![allow(dead_code)]

use anfm_graph::{Graph, NodeOrdering};
use anfm_model::{AnfmModel, ModelConfig, SequenceInputs, TemporalMode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config(hidden: usize, components: usize, steps: usize, temporal: TemporalMode) -> ModelConfig {
    ModelConfig { hidden, layers: 2, components, steps, max_nodes: 8, temporal, ffn_mult: 2, init_seed: 3 }
}

pub fn tiny_model(hidden: usize, components: usize, steps: usize, temporal: TemporalMode) -> AnfmModel {
    AnfmModel::new(tiny_config(hidden, components, steps, temporal)).unwrap()
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// An arbitrary (not necessarily monotone) sequence starting from the empty
/// graph, with a random ordering.
pub fn random_inputs(n: usize, steps: usize, seed: u64) -> SequenceInputs {
    let mut r = rng(seed);
    let mut graphs = vec![Graph::empty(n)];
    for t in 1..=steps {
        graphs.push(random_graph(n, 0.2 + 0.5 * t as f64 / steps as f64, &mut r));
    }
    let ordering = NodeOrdering::from_order(random_permutation(n, &mut r)).unwrap();
    SequenceInputs::from_graphs(&graphs, &ordering).unwrap()
}

/// Every edge subset of the complete graph on `n` nodes.
pub fn all_edge_sets(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    (0..1u32 << pairs.len())
        .map(|mask| pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect())
        .collect()
}

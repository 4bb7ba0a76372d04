//! Dense per-step inputs of the mixer built from a graph sequence.

use anfm_graph::spectral::{CYCLE_KINDS, LAP_PE_DIM, RWPE_DIM};
use anfm_graph::{node_features, Edge, Graph, NodeOrdering, NoisySequence};
use anfm_tensor::Tensor;

use crate::ModelError;

/// Per-node input width: Laplacian PE, random-walk PE and cycle counts.
pub const FEATURE_DIM: usize = LAP_PE_DIM + RWPE_DIM + CYCLE_KINDS;

/// Input features of one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFeatures {
    /// `(n, FEATURE_DIM)` row-major.
    pub node: Vec<f64>,
    /// `log1p` of the graph's 3-, 4- and 5-cycle totals.
    pub totals: [f64; CYCLE_KINDS],
}

pub fn step_features(g: &Graph) -> StepFeatures {
    let f = node_features(g);
    let mut node = Vec::with_capacity(g.n() * FEATURE_DIM);
    for i in 0..g.n() {
        node.extend_from_slice(&f.lap_pe[i]);
        node.extend_from_slice(&f.rwpe[i]);
        node.extend(f.cycle_counts[i].iter().map(|&c| (c as f64).ln_1p()));
    }
    StepFeatures { node, totals: f.graph_cycle_totals.map(|c| (c as f64).ln_1p()) }
}

pub(crate) fn dense_adjacency(n: usize, edges: &[Edge]) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for &(i, j) in edges {
        a[i * n + j] = 1.0;
        a[j * n + i] = 1.0;
    }
    a
}

/// Teacher-forcing inputs of one sequence: the model reads `G~_0..G~_{T-1}`
/// and predicts `G~_1..G~_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceInputs {
    pub n: usize,
    pub steps: usize,
    /// `(T, n, n)` adjacency of the input graphs.
    pub adjacency: Tensor,
    /// `(T, n, FEATURE_DIM)`.
    pub features: Tensor,
    /// `(T, CYCLE_KINDS)` log1p cycle totals.
    pub cycle_totals: Tensor,
    /// Positional-embedding row of each node.
    pub positions: Vec<usize>,
    /// `(T, n, n)` adjacency of the target graphs.
    pub targets: Tensor,
}

impl SequenceInputs {
    /// Inputs from graphs `G~_0..G~_T` on a shared node set.
    pub fn from_graphs(graphs: &[Graph], ordering: &NodeOrdering) -> Result<Self, ModelError> {
        if graphs.len() < 2 {
            return Err(ModelError::InvalidInput("a sequence needs at least two graphs".into()));
        }
        let n = graphs[0].n();
        if graphs.iter().any(|g| g.n() != n) || ordering.len() != n {
            return Err(ModelError::InvalidInput("graphs and ordering must share one node set".into()));
        }
        let steps = graphs.len() - 1;
        let positions: Vec<usize> = (0..n).map(|v| ordering.position(v)).collect();
        let mut adjacency = Vec::with_capacity(steps * n * n);
        let mut features = Vec::with_capacity(steps * n * FEATURE_DIM);
        let mut totals = Vec::with_capacity(steps * CYCLE_KINDS);
        let mut targets = Vec::with_capacity(steps * n * n);
        for t in 0..steps {
            adjacency.extend(dense_adjacency(n, graphs[t].edges()));
            // Features are computed with nodes labeled by position, so the
            // Laplacian eigenvector signs match identity-ordered sampling.
            let f = step_features(&graphs[t].relabel(&positions));
            for &p in &positions {
                features.extend_from_slice(&f.node[p * FEATURE_DIM..(p + 1) * FEATURE_DIM]);
            }
            totals.extend(f.totals);
            targets.extend(dense_adjacency(n, graphs[t + 1].edges()));
        }
        Ok(Self {
            n,
            steps,
            adjacency: Tensor { shape: vec![steps, n, n], data: adjacency },
            features: Tensor { shape: vec![steps, n, FEATURE_DIM], data: features },
            cycle_totals: Tensor { shape: vec![steps, CYCLE_KINDS], data: totals },
            positions,
            targets: Tensor { shape: vec![steps, n, n], data: targets },
        })
    }

    pub fn from_noisy(seq: &NoisySequence) -> Result<Self, ModelError> {
        let graphs: Vec<Graph> = (0..=seq.steps()).map(|t| seq.graph(t)).collect();
        Self::from_graphs(&graphs, &seq.ordering)
    }

    /// The same inputs with node `v` renamed to `perm[v]` everywhere.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let permute_pairs = |t: &Tensor| {
            let mut out = Tensor::zeros(&t.shape);
            for s in 0..self.steps {
                for i in 0..n {
                    for j in 0..n {
                        out.data[s * n * n + perm[i] * n + perm[j]] = t.data[s * n * n + i * n + j];
                    }
                }
            }
            out
        };
        let mut features = Tensor::zeros(&self.features.shape);
        for s in 0..self.steps {
            for i in 0..n {
                let src = (s * n + i) * FEATURE_DIM;
                let dst = (s * n + perm[i]) * FEATURE_DIM;
                features.data[dst..dst + FEATURE_DIM].copy_from_slice(&self.features.data[src..src + FEATURE_DIM]);
            }
        }
        let mut positions = vec![0; n];
        for i in 0..n {
            positions[perm[i]] = self.positions[i];
        }
        Self {
            n,
            steps: self.steps,
            adjacency: permute_pairs(&self.adjacency),
            features,
            cycle_totals: self.cycle_totals.clone(),
            positions,
            targets: permute_pairs(&self.targets),
        }
    }

    /// Inputs restricted to the first `steps` steps.
    pub fn truncated(&self, steps: usize) -> Self {
        assert!(steps >= 1 && steps <= self.steps);
        let n = self.n;
        let cut = |t: &Tensor, per: usize| {
            let mut shape = t.shape.clone();
            shape[0] = steps;
            Tensor { shape, data: t.data[..steps * per].to_vec() }
        };
        Self {
            n,
            steps,
            adjacency: cut(&self.adjacency, n * n),
            features: cut(&self.features, n * FEATURE_DIM),
            cycle_totals: cut(&self.cycle_totals, CYCLE_KINDS),
            positions: self.positions.clone(),
            targets: cut(&self.targets, n * n),
        }
    }
}

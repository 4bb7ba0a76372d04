//! Autoregressive generation from the empty graph with cached temporal
//! keys and values.

use std::time::{Duration, Instant};

use anfm_graph::{derive_seed, Edge, Graph, NodeOrdering};
use anfm_tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backbone::TemporalCache;
use crate::inputs::{dense_adjacency, step_features, SequenceInputs};
use crate::likelihood::{step_log_likelihood, EdgeDistribution};
use crate::model::AnfmModel;
use crate::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Draw a component from `pi`, then every pair independently.
    Stochastic,
    /// Draw a component from `pi`, then keep the pairs with `p > 1/2`.
    ComponentMode,
}

/// A generated sequence `G~_0..G~_T` with the log-probability of each step.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub n: usize,
    pub edge_sets: Vec<Vec<Edge>>,
    pub step_log_probs: Vec<f64>,
    pub components: Vec<usize>,
    pub elapsed: Duration,
}

impl Rollout {
    pub fn steps(&self) -> usize {
        self.edge_sets.len() - 1
    }

    pub fn graph(&self, t: usize) -> Graph {
        Graph::from_pairs_lossy(self.n, self.edge_sets[t].iter().copied())
    }

    pub fn final_graph(&self) -> Graph {
        self.graph(self.steps())
    }

    pub fn log_prob(&self) -> f64 {
        self.step_log_probs.iter().sum()
    }

    /// Teacher-forcing inputs of this trajectory under the identity ordering.
    pub fn inputs(&self) -> Result<SequenceInputs, ModelError> {
        let graphs: Vec<Graph> = (0..=self.steps()).map(|t| self.graph(t)).collect();
        SequenceInputs::from_graphs(&graphs, &NodeOrdering::identity(self.n))
    }
}

fn draw_component(log_pi: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, l) in log_pi.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return k;
        }
    }
    log_pi.len() - 1
}

/// Samples one sequence on `n` nodes with the identity node ordering.
pub fn sample(model: &AnfmModel, n: usize, rng: &mut ChaCha8Rng, mode: SampleMode) -> Result<Rollout, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidInput("cannot sample a graph with zero nodes".into()));
    }
    if n > model.config.max_nodes {
        return Err(ModelError::TooManyNodes { n, max: model.config.max_nodes });
    }
    let start = Instant::now();
    let steps = model.config.steps;
    let positions: Vec<usize> = (0..n).collect();
    let mut cache = TemporalCache::default();
    let mut edge_sets: Vec<Vec<Edge>> = vec![Vec::new()];
    let mut step_log_probs = Vec::with_capacity(steps);
    let mut components = Vec::with_capacity(steps);
    for _ in 0..steps {
        let current = edge_sets.last().expect("nonempty");
        let graph = Graph::from_pairs_lossy(n, current.iter().copied());
        let features = step_features(&graph);
        let adjacency = Tensor { shape: vec![n, n], data: dense_adjacency(n, current) };
        let mut tape = Tape::inference();
        let h = model.backbone.forward_step(&mut tape, &model.params, &adjacency, &features, &positions, &mut cache)?;
        let logits = model.decoder.edge_logits(&mut tape, &model.params, h)?;
        let log_pi = model.decoder.log_mixture(&mut tape, &model.params, h)?;
        let dist =
            EdgeDistribution { n, log_pi: tape.value(log_pi).data.clone(), logits: tape.value(logits).data.clone() };
        let k = draw_component(&dist.log_pi, rng);
        let mut next = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let keep = match mode {
                    SampleMode::Stochastic => rng.random::<f64>() < dist.probability(k, i, j),
                    SampleMode::ComponentMode => dist.probability(k, i, j) > 0.5,
                };
                if keep {
                    next.push((i, j));
                }
            }
        }
        step_log_probs.push(step_log_likelihood(&dist, &next).value);
        components.push(k);
        edge_sets.push(next);
    }
    Ok(Rollout { n, edge_sets, step_log_probs, components, elapsed: start.elapsed() })
}

/// Samples one rollout per requested size; rollout `i` uses a generator
/// seeded from `(seed, i)`, so results do not depend on the thread count.
pub fn sample_many(
    model: &AnfmModel,
    sizes: &[usize],
    seed: u64,
    mode: SampleMode,
) -> Result<Vec<Rollout>, ModelError> {
    sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            sample(model, n, &mut rng, mode)
        })
        .collect()
}

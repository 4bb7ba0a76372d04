//! Edge filtrations `E_t = {e : f(e) <= a_t}`, their schedules, the node
//! orderings that accompany them, and the pairwise noise augmentation of the
//! intermediate steps.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::algo::{dfs_ordering, edge_betweenness, is_connected, line_graph};
use crate::graph::{Edge, Graph, NodeOrdering};
use crate::spectral::fiedler_vector;
use crate::GraphError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationFunction {
    LineFiedler,
    Dfs,
    Betweenness,
    Remoteness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `gamma(x) = x`.
    Linear,
    /// `gamma(x) = 1 - cos(pi x / 2)`.
    Convex,
    /// `gamma(x) = sin(pi x / 2)`.
    Concave,
    /// Node-count thresholds rising affinely from 2 to `n`.
    DfsLinear,
}

impl Schedule {
    /// Fraction of edges that must be present at relative time `x`.
    pub fn gamma(self, x: f64) -> f64 {
        match self {
            Schedule::Linear | Schedule::DfsLinear => x,
            Schedule::Convex => 1.0 - (FRAC_PI_2 * x).cos(),
            Schedule::Concave => (FRAC_PI_2 * x).sin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltrationConfig {
    pub function: FiltrationFunction,
    pub steps: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Standard deviation of the Gaussian jitter on node weights when the
    /// ordering is derived from edge weights (non-DFS functions).
    #[serde(default)]
    pub node_jitter: f64,
}

impl FiltrationConfig {
    pub fn new(function: FiltrationFunction, steps: usize) -> Self {
        let schedule = match function {
            FiltrationFunction::Dfs => Schedule::DfsLinear,
            _ => Schedule::Linear,
        };
        Self { function, steps, schedule, seed: 0, node_jitter: 0.0 }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.steps < 2 {
            return Err(GraphError::InvalidConfig(format!("steps must be at least 2, got {}", self.steps)));
        }
        let dfs_fn = self.function == FiltrationFunction::Dfs;
        let dfs_schedule = self.schedule == Schedule::DfsLinear;
        if dfs_fn != dfs_schedule {
            return Err(GraphError::InvalidConfig(format!(
                "schedule {:?} does not apply to filtration function {:?}",
                self.schedule, self.function
            )));
        }
        if !(self.node_jitter >= 0.0 && self.node_jitter.is_finite()) {
            return Err(GraphError::InvalidConfig("node_jitter must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Filtration function values, aligned with `Graph::edges()`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    pub values: Vec<f64>,
}

pub fn edge_weights(
    g: &Graph,
    function: FiltrationFunction,
    ordering: Option<&NodeOrdering>,
) -> Result<EdgeWeights, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let values = match function {
        FiltrationFunction::Dfs => {
            let ord = ordering.ok_or(GraphError::MissingOrdering)?;
            g.edges().iter().map(|&(a, b)| ord.rank(a).max(ord.rank(b)) as f64).collect()
        }
        FiltrationFunction::LineFiedler => {
            if g.num_edges() <= 1 {
                vec![0.0; g.num_edges()]
            } else {
                let (lg, _) = line_graph(g)?;
                fiedler_vector(&lg)?
            }
        }
        FiltrationFunction::Betweenness => edge_betweenness(g),
        FiltrationFunction::Remoteness => edge_betweenness(g).into_iter().map(|x| -x).collect(),
    };
    Ok(EdgeWeights { values })
}

/// Thresholds `a_0..a_T` with `a_0 = -inf` and `a_T = +inf`.
///
/// Quantile schedules take the `ceil(gamma(t/T) * |E|)`-th smallest weight;
/// the DFS schedule rises affinely from 2 at `t = 1` to `n` at `t = T`.
pub fn thresholds(weights: &EdgeWeights, config: &FiltrationConfig, n: usize) -> Vec<f64> {
    let t_max = config.steps;
    let mut a = vec![f64::NEG_INFINITY; t_max + 1];
    a[t_max] = f64::INFINITY;
    match config.schedule {
        Schedule::DfsLinear => {
            for (t, slot) in a.iter_mut().enumerate().take(t_max).skip(1) {
                *slot = 2.0 + (t - 1) as f64 * (n as f64 - 2.0) / (t_max - 1) as f64;
            }
        }
        schedule => {
            let mut sorted = weights.values.clone();
            sorted.sort_by(f64::total_cmp);
            let m = sorted.len() as f64;
            for (t, slot) in a.iter_mut().enumerate().take(t_max).skip(1) {
                let quota = schedule.gamma(t as f64 / t_max as f64) * m;
                let q = (quota - 1e-9).ceil().max(0.0) as usize;
                *slot = if q == 0 { f64::NEG_INFINITY } else { sorted[q.min(sorted.len()) - 1] };
            }
        }
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationSequence {
    pub n: usize,
    /// `E_0..E_T`, each sorted.
    pub edge_sets: Vec<Vec<Edge>>,
    pub thresholds: Vec<f64>,
    pub config: FiltrationConfig,
    pub source_id: Option<usize>,
    /// The DFS ordering for DFS filtrations, otherwise the ordering derived
    /// from the edge weights; indexes the positional embeddings.
    pub ordering: NodeOrdering,
}

impl FiltrationSequence {
    pub fn steps(&self) -> usize {
        self.edge_sets.len() - 1
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.edge_sets.iter().map(Vec::len).collect()
    }

    /// The unperturbed sequence as a noisy sequence with zero noise.
    pub fn to_noisy(&self) -> NoisySequence {
        NoisySequence {
            n: self.n,
            edge_sets: self.edge_sets.clone(),
            lambdas: vec![0.0; self.edge_sets.len()],
            ordering: self.ordering.clone(),
        }
    }
}

/// Builds the filtration of a connected graph; randomness (DFS root and
/// neighbor order, node-weight jitter) is drawn from `config.seed`.
pub fn build_filtration(g: &Graph, config: &FiltrationConfig) -> Result<FiltrationSequence, GraphError> {
    config.validate()?;
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (weights, ordering) = match config.function {
        FiltrationFunction::Dfs => {
            let root = if g.n() == 0 { 0 } else { rng.random_range(0..g.n()) };
            let ordering = if g.n() == 0 { NodeOrdering::identity(0) } else { dfs_ordering(g, root, &mut rng)? };
            (edge_weights(g, config.function, Some(&ordering))?, ordering)
        }
        f => {
            let w = edge_weights(g, f, None)?;
            let ordering = derived_node_ordering(g, &w, config.node_jitter, &mut rng)?;
            (w, ordering)
        }
    };
    Ok(filtration_from_weights(g, &weights, config, ordering))
}

/// Sub-level sets of given weights under the schedule of `config`.
pub fn filtration_from_weights(
    g: &Graph,
    weights: &EdgeWeights,
    config: &FiltrationConfig,
    ordering: NodeOrdering,
) -> FiltrationSequence {
    let a = thresholds(weights, config, g.n());
    let edge_sets = a
        .iter()
        .map(|&at| g.edges().iter().zip(&weights.values).filter(|(_, &w)| w <= at).map(|(&e, _)| e).collect())
        .collect();
    FiltrationSequence { n: g.n(), edge_sets, thresholds: a, config: config.clone(), source_id: None, ordering }
}

/// Noise strength per step: affine from `first` at `t = 1` to `last` at `t = T - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSchedule {
    pub first: f64,
    pub last: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self { first: 0.25, last: 0.05 }
    }
}

impl LambdaSchedule {
    pub fn none() -> Self {
        Self { first: 0.0, last: 0.0 }
    }

    pub fn constant(lambda: f64) -> Self {
        Self { first: lambda, last: lambda }
    }

    /// `lambda_t`; zero at the endpoints `t = 0` and `t = T`.
    pub fn value(&self, t: usize, steps: usize) -> f64 {
        if t == 0 || t >= steps {
            return 0.0;
        }
        if steps <= 2 {
            return self.first;
        }
        self.first + (t - 1) as f64 * (self.last - self.first) / (steps - 2) as f64
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        for x in [self.first, self.last] {
            if !(0.0..=1.0).contains(&x) {
                return Err(GraphError::InvalidConfig(format!("noise level {x} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisySequence {
    pub n: usize,
    /// `E~_0..E~_T`, each sorted.
    pub edge_sets: Vec<Vec<Edge>>,
    /// `lambda_t` used at each step (0 at the endpoints).
    pub lambdas: Vec<f64>,
    pub ordering: NodeOrdering,
}

impl NoisySequence {
    pub fn steps(&self) -> usize {
        self.edge_sets.len() - 1
    }

    pub fn graph(&self, t: usize) -> Graph {
        Graph::from_pairs_lossy(self.n, self.edge_sets[t].iter().copied())
    }

    pub fn final_graph(&self) -> Graph {
        self.graph(self.steps())
    }
}

/// Edge inclusion probability for one pair at a noised step.
pub fn noise_probability(in_filtration: bool, lambda: f64, density: f64) -> f64 {
    if in_filtration {
        (1.0 - lambda) + lambda * density
    } else {
        lambda * density
    }
}

/// Resamples every node pair of each intermediate step independently; the
/// expected edge count of each step is unchanged.
pub fn noise_augment<R: Rng + ?Sized>(
    seq: &FiltrationSequence,
    lambdas: &LambdaSchedule,
    rng: &mut R,
) -> NoisySequence {
    let steps = seq.steps();
    let n = seq.n;
    let pairs = n * n.saturating_sub(1) / 2;
    let mut edge_sets = Vec::with_capacity(steps + 1);
    let mut used = Vec::with_capacity(steps + 1);
    for (t, et) in seq.edge_sets.iter().enumerate() {
        let lambda = lambdas.value(t, steps);
        used.push(lambda);
        if t == 0 || t == steps || lambda == 0.0 {
            edge_sets.push(et.clone());
            continue;
        }
        let density = if pairs == 0 { 0.0 } else { et.len() as f64 / pairs as f64 };
        let p_in = noise_probability(true, lambda, density);
        let p_out = noise_probability(false, lambda, density);
        let mut noisy = Vec::new();
        let mut cursor = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let present = cursor < et.len() && et[cursor] == (i, j);
                if present {
                    cursor += 1;
                }
                let p = if present { p_in } else { p_out };
                if rng.random::<f64>() < p {
                    noisy.push((i, j));
                }
            }
        }
        edge_sets.push(noisy);
    }
    NoisySequence { n, edge_sets, lambdas: used, ordering: seq.ordering.clone() }
}

/// Orders nodes by non-increasing mean incident edge weight (plus optional
/// Gaussian jitter), ties broken by node id.
pub fn derived_node_ordering<R: Rng + ?Sized>(
    g: &Graph,
    weights: &EdgeWeights,
    sigma: f64,
    rng: &mut R,
) -> Result<NodeOrdering, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let mut h = node_weights(g, weights);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| GraphError::InvalidConfig(e.to_string()))?;
        h.iter_mut().for_each(|x| *x += normal.sample(rng));
    }
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
    NodeOrdering::from_order(order)
}

/// Mean incident edge weight per node (0 for isolated nodes).
pub fn node_weights(g: &Graph, weights: &EdgeWeights) -> Vec<f64> {
    let mut sum = vec![0.0; g.n()];
    for (&(a, b), &w) in g.edges().iter().zip(&weights.values) {
        sum[a] += w;
        sum[b] += w;
    }
    sum.iter().enumerate().map(|(v, s)| if g.degree(v) == 0 { 0.0 } else { s / g.degree(v) as f64 }).collect()
}

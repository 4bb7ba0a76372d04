//! Mixer backbone: per-step structural layers alternating with temporal
//! layers that mix each node's representations across steps.

use anfm_graph::spectral::CYCLE_KINDS;
use anfm_tensor::{ParamId, ParamStore, Result, Tape, Tensor, TensorError, Var, MASKED};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{ModelConfig, TemporalMode};
use crate::inputs::{SequenceInputs, StepFeatures, FEATURE_DIM};
use crate::layers::{timestep_embedding, LayerNorm, Linear, Mlp};

/// Standard deviation of the positional embedding initialization.
const NODE_EMBEDDING_STD: f64 = 0.5;

/// Structure-aware attention within one step: a GIN aggregation `z` supplies
/// queries and keys, values come from the raw input, and the concatenation
/// `[z, attention]` is projected back and modulated by FiLM.
#[derive(Clone, Debug)]
struct Structural {
    gin: Mlp,
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    film: Linear,
    norm: LayerNorm,
}

#[derive(Clone, Debug)]
struct TemporalAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    norm: LayerNorm,
}

#[derive(Clone, Debug)]
struct Temporal {
    attention: Option<TemporalAttention>,
    ffn: Mlp,
    norm: LayerNorm,
}

#[derive(Clone, Debug)]
struct Block {
    structural: Structural,
    temporal: Temporal,
}

/// Keys and values of earlier steps for each temporal attention layer,
/// shaped `(t, n, D)`.
#[derive(Clone, Debug, Default)]
pub struct TemporalCache {
    keys: Vec<Option<Tensor>>,
    values: Vec<Option<Tensor>>,
    /// Steps already processed.
    pub len: usize,
}

fn append_steps(slot: &mut Option<Tensor>, new: &Tensor) {
    match slot {
        Some(t) => {
            t.shape[0] += new.shape[0];
            t.data.extend_from_slice(&new.data);
        }
        None => *slot = Some(new.clone()),
    }
}

#[derive(Clone, Debug)]
pub struct Backbone {
    pub hidden: usize,
    pub max_nodes: usize,
    pub temporal: TemporalMode,
    input: Linear,
    node_embedding: ParamId,
    blocks: Vec<Block>,
}

impl Backbone {
    pub fn new(store: &mut ParamStore, prefix: &str, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.hidden;
        let input = Linear::new(store, &format!("{prefix}.input"), FEATURE_DIM, d, rng);
        let normal = Normal::new(0.0, NODE_EMBEDDING_STD).expect("valid std");
        let table = Tensor::from_fn(&[cfg.max_nodes, d], |_| normal.sample(rng));
        let node_embedding = store.add(format!("{prefix}.node_embedding"), table);
        let blocks = (0..cfg.layers)
            .map(|l| {
                let p = format!("{prefix}.block{l}");
                let structural = Structural {
                    gin: Mlp::new(store, &format!("{p}.gin"), [d, d, d], rng),
                    q: Linear::new(store, &format!("{p}.sq"), d, d, rng),
                    k: Linear::new(store, &format!("{p}.sk"), d, d, rng),
                    v: Linear::new(store, &format!("{p}.sv"), d, d, rng),
                    out: Linear::new(store, &format!("{p}.so"), 2 * d, d, rng),
                    // Zero FiLM weights start every layer unmodulated.
                    film: Linear::with_gain(store, &format!("{p}.film"), d + CYCLE_KINDS, 2 * d, 0.0, rng),
                    norm: LayerNorm::new(store, &format!("{p}.snorm"), d),
                };
                let attention = (cfg.temporal == TemporalMode::Causal).then(|| TemporalAttention {
                    q: Linear::new(store, &format!("{p}.tq"), d, d, rng),
                    k: Linear::new(store, &format!("{p}.tk"), d, d, rng),
                    v: Linear::new(store, &format!("{p}.tv"), d, d, rng),
                    out: Linear::new(store, &format!("{p}.to"), d, d, rng),
                    norm: LayerNorm::new(store, &format!("{p}.tanorm"), d),
                });
                let temporal = Temporal {
                    attention,
                    ffn: Mlp::new(store, &format!("{p}.ffn"), [d, cfg.ffn_mult * d, d], rng),
                    norm: LayerNorm::new(store, &format!("{p}.fnorm"), d),
                };
                Block { structural, temporal }
            })
            .collect();
        Self { hidden: d, max_nodes: cfg.max_nodes, temporal: cfg.temporal, input, node_embedding, blocks }
    }

    fn check_positions(&self, positions: &[usize]) -> Result<()> {
        if let Some(&p) = positions.iter().find(|&&p| p >= self.max_nodes) {
            return Err(TensorError::InvalidArgument {
                op: "node_embedding",
                reason: format!("position {p} needs more than {} embedding rows", self.max_nodes),
            });
        }
        Ok(())
    }

    /// FiLM conditioning rows `[timestep embedding, log1p cycle totals]`.
    fn conditioning(&self, first_step: usize, totals: &[f64]) -> Tensor {
        let steps = totals.len() / CYCLE_KINDS;
        let width = self.hidden + CYCLE_KINDS;
        let mut data = Vec::with_capacity(steps * width);
        for s in 0..steps {
            data.extend(timestep_embedding(first_step + s, self.hidden));
            data.extend_from_slice(&totals[s * CYCLE_KINDS..(s + 1) * CYCLE_KINDS]);
        }
        Tensor { shape: vec![steps, width], data }
    }

    /// Input representations `f(G_t)_i + W_node[pos(i)]`, shaped `(T, n, D)`.
    pub fn input_reps(&self, tape: &mut Tape, store: &ParamStore, features: Var, positions: &[usize]) -> Result<Var> {
        self.check_positions(positions)?;
        let x = self.input.forward(tape, store, features)?;
        let table = tape.param(store, self.node_embedding)?;
        let emb = tape.gather_rows(table, positions)?;
        tape.add(x, emb)
    }

    /// Node representations for every step of a sequence, `(T, n, D)`; row
    /// `t` depends only on the input graphs `0..=t`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, inputs: &SequenceInputs) -> Result<Var> {
        let features = tape.constant(inputs.features.clone())?;
        let x = self.input_reps(tape, store, features, &inputs.positions)?;
        let adjacency = tape.constant(inputs.adjacency.clone())?;
        let cond = tape.constant(self.conditioning(0, &inputs.cycle_totals.data))?;
        self.mix(tape, store, x, adjacency, cond, None)
    }

    /// Representations of step `cache.len` given its input graph, reusing the
    /// cached keys and values of earlier steps; returns `(1, n, D)`.
    pub fn forward_step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        adjacency: &Tensor,
        features: &StepFeatures,
        positions: &[usize],
        cache: &mut TemporalCache,
    ) -> Result<Var> {
        let n = positions.len();
        let f = tape.constant(Tensor { shape: vec![1, n, FEATURE_DIM], data: features.node.clone() })?;
        let x = self.input_reps(tape, store, f, positions)?;
        let adjacency = tape.constant(Tensor { shape: vec![1, n, n], data: adjacency.data.clone() })?;
        let cond = tape.constant(self.conditioning(cache.len, &features.totals))?;
        let out = self.mix(tape, store, x, adjacency, cond, Some(&mut *cache))?;
        cache.len += 1;
        Ok(out)
    }

    fn mix(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        mut x: Var,
        adjacency: Var,
        cond: Var,
        mut cache: Option<&mut TemporalCache>,
    ) -> Result<Var> {
        if let Some(c) = cache.as_deref_mut() {
            c.keys.resize(self.blocks.len(), None);
            c.values.resize(self.blocks.len(), None);
        }
        for (b, block) in self.blocks.iter().enumerate() {
            x = self.structural(tape, store, &block.structural, x, adjacency, cond)?;
            x = self.temporal(tape, store, &block.temporal, x, b, cache.as_deref_mut())?;
        }
        Ok(x)
    }

    fn structural(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        layer: &Structural,
        x: Var,
        adjacency: Var,
        cond: Var,
    ) -> Result<Var> {
        let d = self.hidden;
        let steps = tape.shape(x)[0];
        let agg = tape.matmul(adjacency, x)?;
        let agg = tape.add(x, agg)?;
        let z = layer.gin.forward(tape, store, agg)?;
        let q = layer.q.forward(tape, store, z)?;
        let k = layer.k.forward(tape, store, z)?;
        let v = layer.v.forward(tape, store, x)?;
        let scores = tape.attention_scores(q, k, 1.0 / (d as f64).sqrt(), None)?;
        let weights = tape.softmax(scores)?;
        let attended = tape.matmul(weights, v)?;
        let both = tape.concat_last(&[z, attended])?;
        let h = layer.out.forward(tape, store, both)?;
        let film = layer.film.forward(tape, store, cond)?;
        let gamma = tape.slice_last(film, 0, d)?;
        let gamma = tape.reshape(gamma, &[steps, 1, d])?;
        let gamma = tape.add_scalar(gamma, 1.0)?;
        let beta = tape.slice_last(film, d, d)?;
        let beta = tape.reshape(beta, &[steps, 1, d])?;
        let h = tape.mul(h, gamma)?;
        let h = tape.add(h, beta)?;
        let h = tape.add(x, h)?;
        layer.norm.forward(tape, store, h)
    }

    fn temporal(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        layer: &Temporal,
        mut x: Var,
        block: usize,
        cache: Option<&mut TemporalCache>,
    ) -> Result<Var> {
        if let Some(att) = &layer.attention {
            let a = self.temporal_attention(tape, store, att, x, block, cache)?;
            let h = tape.add(x, a)?;
            x = att.norm.forward(tape, store, h)?;
        }
        let f = layer.ffn.forward(tape, store, x)?;
        let h = tape.add(x, f)?;
        layer.norm.forward(tape, store, h)
    }

    /// Causal single-head attention of each node over its own past steps.
    fn temporal_attention(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        att: &TemporalAttention,
        x: Var,
        block: usize,
        cache: Option<&mut TemporalCache>,
    ) -> Result<Var> {
        let queries = tape.shape(x)[0];
        let q = att.q.forward(tape, store, x)?;
        let mut k = att.k.forward(tape, store, x)?;
        let mut v = att.v.forward(tape, store, x)?;
        let mut past = 0;
        if let Some(cache) = cache {
            if let (Some(pk), Some(pv)) = (&cache.keys[block], &cache.values[block]) {
                past = pk.shape[0];
                let pk = tape.constant(pk.clone())?;
                let pv = tape.constant(pv.clone())?;
                k = tape.concat_axis0(&[pk, k])?;
                v = tape.concat_axis0(&[pv, v])?;
            }
            let new_k = tape.value(k).clone();
            let new_v = tape.value(v).clone();
            let tail = |t: &Tensor| {
                let per: usize = t.shape[1..].iter().product();
                let mut shape = t.shape.clone();
                shape[0] = queries;
                Tensor { shape, data: t.data[past * per..].to_vec() }
            };
            append_steps(&mut cache.keys[block], &tail(&new_k));
            append_steps(&mut cache.values[block], &tail(&new_v));
        }
        let keys = past + queries;
        let mask = Tensor::from_fn(&[queries, keys], |i| if i % keys > past + i / keys { MASKED } else { 0.0 });
        let mask = tape.constant(mask)?;
        let q = tape.swap01(q)?;
        let k = tape.swap01(k)?;
        let v = tape.swap01(v)?;
        let scores = tape.attention_scores(q, k, 1.0 / (self.hidden as f64).sqrt(), Some(mask))?;
        let weights = tape.softmax(scores)?;
        let out = tape.matmul(weights, v)?;
        let out = tape.swap01(out)?;
        att.out.forward(tape, store, out)
    }
}

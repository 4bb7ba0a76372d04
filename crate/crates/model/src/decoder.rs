//! Edge decoder: per-component pair logits and graph-level mixture weights.

use anfm_tensor::{ParamStore, Result, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::layers::Linear;

#[derive(Clone, Debug)]
struct Component {
    first: Linear,
    second: Linear,
    third: Linear,
}

#[derive(Clone, Debug)]
pub struct EdgeDecoder {
    hidden: usize,
    components: Vec<Component>,
    mix_node: Linear,
    mix_graph: Linear,
    mix_out: Linear,
}

impl EdgeDecoder {
    pub fn new(store: &mut ParamStore, prefix: &str, hidden: usize, components: usize, rng: &mut ChaCha8Rng) -> Self {
        let d = hidden;
        let components = (0..components)
            .map(|k| Component {
                first: Linear::new(store, &format!("{prefix}.comp{k}.dense1"), d, 2 * d, rng),
                second: Linear::new(store, &format!("{prefix}.comp{k}.dense2"), 2 * d, 2 * d, rng),
                // Small third layer: pair logits start near zero (p near 1/2).
                third: Linear::with_gain(store, &format!("{prefix}.comp{k}.dense3"), 2 * d, 2 * d, 0.1, rng),
            })
            .collect::<Vec<_>>();
        let k = components.len();
        Self {
            hidden,
            components,
            mix_node: Linear::new(store, &format!("{prefix}.mix.dense1"), d, d, rng),
            mix_graph: Linear::new(store, &format!("{prefix}.mix.dense2"), d, d, rng),
            mix_out: Linear::new(store, &format!("{prefix}.mix.dense3"), d, k, rng),
        }
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    /// Edge log-odds `l - r` for every component, `(T, K, n, n)`, from node
    /// representations `(T, n, D)`. With `(x, y) = MLP_k(v)` and
    /// `(x^, y^) = Dense3_k(x, y)`, entry `(i, j)` is the symmetrized
    /// `x_i . x^_j - y_i . y^_j`; `sigmoid(l - r) = e^l / (e^l + e^r)`.
    pub fn edge_logits(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let shape = tape.shape(h).to_vec();
        let (steps, n) = (shape[0], shape[1]);
        let d = self.hidden;
        let signs = Tensor::from_fn(&[2 * d], |i| if i < d { 1.0 } else { -1.0 });
        let signs = tape.constant(signs)?;
        let mut per_component = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let a = c.first.forward(tape, store, h)?;
            let a = tape.relu(a)?;
            let a = c.second.forward(tape, store, a)?;
            let xy = tape.relu(a)?;
            let xy_hat = c.third.forward(tape, store, xy)?;
            let signed = tape.mul(xy, signs)?;
            let m = tape.matmul_ex(signed, xy_hat, false, true)?;
            let mt = tape.transpose_last2(m)?;
            let sym = tape.add(m, mt)?;
            let delta = tape.scale(sym, 0.5)?;
            per_component.push(tape.reshape(delta, &[1, steps, n, n])?);
        }
        let stacked = tape.concat_axis0(&per_component)?;
        tape.swap01(stacked)
    }

    /// Log mixture weights `(T, K)` from mean-pooled node representations.
    pub fn log_mixture(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let a = self.mix_node.forward(tape, store, h)?;
        let a = tape.relu(a)?;
        let pooled = tape.mean_axis(a, 1)?;
        let b = self.mix_graph.forward(tape, store, pooled)?;
        let b = tape.relu(b)?;
        let logits = self.mix_out.forward(tape, store, b)?;
        tape.log_softmax(logits)
    }
}

use crate::{ParamGrads, ParamStore, Tensor};

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(&t.shape)).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One update `theta -= lr * m_hat / (sqrt(v_hat) + eps)`; missing
    /// gradients count as zero.
    pub fn update(&mut self, store: &mut ParamStore, grads: &ParamGrads, lr: f64) {
        assert_eq!(self.m.len(), store.len(), "optimizer state does not match the parameter store");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let param = store.get_mut(id);
            let g = grads.get(id);
            for k in 0..param.data.len() {
                let gk = g.map_or(0.0, |g| g.data[k]);
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m.data[k] / bc1;
                let v_hat = v.data[k] / bc2;
                param.data[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Rescales gradients so their global l2 norm is at most `max_norm`;
/// returns the factor applied (1 when no clipping happened).
pub fn clip_grad_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.scale(scale);
        scale
    } else {
        1.0
    }
}

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::{ParamGrads, ParamId, ParamStore, Result, Tensor, TensorError};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(0);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    pub(crate) idx: usize,
}

/// Computes input gradients from `(inputs, output, output_grad, needs_grad)`;
/// entries for inputs that need no gradient may be `None`.
pub(crate) type BackwardFn = Box<dyn Fn(&[&Tensor], &Tensor, &Tensor, &[bool]) -> Vec<Option<Tensor>> + Send>;

pub(crate) struct Node {
    pub(crate) op: &'static str,
    pub(crate) value: Tensor,
    pub(crate) parents: Vec<usize>,
    pub(crate) backward: Option<BackwardFn>,
    pub(crate) requires_grad: bool,
}

/// Records operations in topological order for a single reverse pass.
pub struct Tape {
    id: u64,
    pub(crate) nodes: Vec<Node>,
    params: HashMap<ParamId, usize>,
    consumed: bool,
    inference: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: HashMap::new(),
            consumed: false,
            inference: false,
        }
    }

    /// A tape on which parameters are constants, so no backward rules are
    /// recorded; for sampling and evaluation.
    pub fn inference() -> Self {
        Self { inference: true, ..Self::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn idx(&self, v: Var) -> usize {
        assert_eq!(v.tape, self.id, "variable used on a tape that did not record it");
        v.idx
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v)].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.value(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[self.idx(v)].requires_grad
    }

    fn leaf(&mut self, op: &'static str, value: Tensor, requires_grad: bool) -> Result<Var> {
        let idx = self.nodes.len();
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op, node: idx });
        }
        self.nodes.push(Node { op, value, parents: Vec::new(), backward: None, requires_grad });
        Ok(Var { tape: self.id, idx })
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf("constant", value, false)
    }

    /// A free variable whose gradient is reported by `backward`.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.leaf("input", value, true)
    }

    /// The current value of a stored parameter; repeated calls return the same
    /// variable so its gradient is accumulated once.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&idx) = self.params.get(&id) {
            return Ok(Var { tape: self.id, idx });
        }
        let v = self.leaf("param", store.get(id).clone(), !self.inference)?;
        self.params.insert(id, v.idx);
        Ok(v)
    }

    /// Copy of `v` cut off from the gradient flow.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub(crate) fn push(
        &mut self,
        op: &'static str,
        value: Tensor,
        parents: &[Var],
        backward: BackwardFn,
    ) -> Result<Var> {
        let idx = self.nodes.len();
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op, node: idx });
        }
        let parents: Vec<usize> = parents.iter().map(|&p| self.idx(p)).collect();
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        let backward = requires_grad.then_some(backward);
        self.nodes.push(Node { op, value, parents, backward, requires_grad });
        Ok(Var { tape: self.id, idx })
    }

    /// Reverse pass from a one-element `loss`; allowed once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(TensorError::BackwardTwice);
        }
        let root = self.idx(loss);
        let shape = self.nodes[root].value.shape.clone();
        if self.nodes[root].value.len() != 1 {
            return Err(TensorError::NotScalar(shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root] = Some(Tensor::full(&shape, 1.0));
        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(backward) = &node.backward {
                let inputs: Vec<&Tensor> = node.parents.iter().map(|&p| &self.nodes[p].value).collect();
                let needs: Vec<bool> = node.parents.iter().map(|&p| self.nodes[p].requires_grad).collect();
                let parent_grads = backward(&inputs, &node.value, &g, &needs);
                for ((&p, pg), need) in node.parents.iter().zip(parent_grads).zip(needs) {
                    let Some(pg) = pg.filter(|_| need) else { continue };
                    debug_assert_eq!(pg.shape, self.nodes[p].value.shape, "gradient shape of {}", node.op);
                    if !pg.is_finite() {
                        return Err(TensorError::NonFiniteGradient { op: node.op, node: i });
                    }
                    match &mut grads[p] {
                        Some(acc) => acc.data.iter_mut().zip(&pg.data).for_each(|(a, b)| *a += b),
                        slot => *slot = Some(pg),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { tape: self.id, grads, params: self.params.clone() })
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
    params: HashMap<ParamId, usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when no path reaches it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        assert_eq!(v.tape, self.tape, "variable from another tape");
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Gradients of the parameters touched by the tape, aligned with `store`.
    pub fn into_param_grads(mut self, store: &ParamStore) -> ParamGrads {
        let mut out = ParamGrads::zeros_like(store);
        for (id, idx) in self.params {
            out.grads[id.0] = self.grads[idx].take();
        }
        out
    }
}

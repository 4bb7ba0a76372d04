mod common;

use anfm_graph::{Graph, NodeOrdering};
use anfm_model::{AnfmModel, SequenceInputs, TemporalMode};
use anfm_tensor::Tape;
use common::*;

const STEPS: usize = 5;

fn graphs(n: usize, seed: u64) -> Vec<Graph> {
    let mut r = rng(seed);
    std::iter::once(Graph::empty(n)).chain((0..STEPS).map(|_| random_graph(n, 0.4, &mut r))).collect()
}

/// `(logits, log_pi)` rows of every step.
fn outputs(model: &AnfmModel, graphs: &[Graph], ordering: &NodeOrdering) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let inputs = SequenceInputs::from_graphs(graphs, ordering).unwrap();
    let mut tape = Tape::inference();
    let vars = model.log_likelihood_vars(&mut tape, &inputs).unwrap();
    let rows = |v, per: usize| tape.value(v).data.chunks(per).map(<[f64]>::to_vec).collect::<Vec<_>>();
    let (n, k) = (inputs.n, model.config.components);
    (rows(vars.logits, k * n * n), rows(vars.log_pi, k))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn causal_outputs_ignore_future_graphs() {
    let model = tiny_model(8, 2, STEPS, TemporalMode::Causal);
    let n = 6;
    let base = graphs(n, 1);
    let ordering = NodeOrdering::identity(n);
    let (logits, log_pi) = outputs(&model, &base, &ordering);
    for t in 0..STEPS {
        let mut changed = base.clone();
        let other = graphs(n, 100 + t as u64);
        changed[t + 1..].clone_from_slice(&other[t + 1..]);
        let (l2, p2) = outputs(&model, &changed, &ordering);
        for s in 0..=t {
            assert!(max_diff(&logits[s], &l2[s]) <= 1e-12, "step {s} moved when step {} changed", t + 1);
            assert!(max_diff(&log_pi[s], &p2[s]) <= 1e-12);
        }
        if t + 1 < STEPS {
            assert!(max_diff(&logits[t + 1], &l2[t + 1]) > 1e-6, "changed input must matter");
        }
    }
}

#[test]
fn first_order_outputs_depend_on_the_current_graph_only() {
    let model = tiny_model(8, 2, STEPS, TemporalMode::FirstOrder);
    let n = 6;
    let base = graphs(n, 2);
    let ordering = NodeOrdering::identity(n);
    let (logits, log_pi) = outputs(&model, &base, &ordering);
    for t in 0..STEPS {
        let mut changed = graphs(n, 200 + t as u64);
        changed[t] = base[t].clone();
        let (l2, p2) = outputs(&model, &changed, &ordering);
        assert!(max_diff(&logits[t], &l2[t]) <= 1e-12);
        assert!(max_diff(&log_pi[t], &p2[t]) <= 1e-12);
    }
}

#[test]
fn causal_outputs_do_depend_on_the_past() {
    let model = tiny_model(8, 2, STEPS, TemporalMode::Causal);
    let n = 6;
    let base = graphs(n, 3);
    let ordering = NodeOrdering::identity(n);
    let (logits, _) = outputs(&model, &base, &ordering);
    let mut changed = base.clone();
    changed[1] = random_graph(n, 0.9, &mut rng(4));
    let (l2, _) = outputs(&model, &changed, &ordering);
    assert!(max_diff(&logits[3], &l2[3]) > 1e-9);
}

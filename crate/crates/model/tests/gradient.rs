mod common;

use anfm_model::{AnfmModel, TemporalMode};
use anfm_tensor::Tape;
use common::*;

const H: f64 = 1e-5;

fn total(model: &AnfmModel, inputs: &anfm_model::SequenceInputs) -> f64 {
    model.sequence_log_likelihood(inputs).unwrap().total
}

/// Central differences over every parameter scalar against the tape gradient.
fn max_relative_error(mut model: AnfmModel, inputs: &anfm_model::SequenceInputs) -> f64 {
    let mut tape = Tape::new();
    let vars = model.log_likelihood_vars(&mut tape, inputs).unwrap();
    let grads = tape.backward(vars.total).unwrap().into_param_grads(&model.params);
    let mut worst: f64 = 0.0;
    for id in model.params.ids().collect::<Vec<_>>() {
        for i in 0..model.params.get(id).len() {
            let orig = model.params.get(id).data[i];
            model.params.get_mut(id).data[i] = orig + H;
            let up = total(&model, inputs);
            model.params.get_mut(id).data[i] = orig - H;
            let down = total(&model, inputs);
            model.params.get_mut(id).data[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads.get(id).map_or(0.0, |g| g.data[i]);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn sequence_log_likelihood_gradient_matches_central_differences() {
    for mode in [TemporalMode::Causal, TemporalMode::FirstOrder] {
        let model = tiny_model(8, 2, 3, mode);
        let inputs = random_inputs(4, 3, 21);
        let err = max_relative_error(model, &inputs);
        assert!(err < 1e-4, "{mode:?}: max relative error {err}");
    }
}

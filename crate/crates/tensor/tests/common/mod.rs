#![allow(dead_code)]

use anfm_tensor::{Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values with magnitude in `[0.05, 1]` and random sign, away from the kinks
/// of relu, clamp and min/max at zero.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.05..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

fn scalar_loss(
    f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>,
    inputs: &[Tensor],
    weights: &Tensor,
    track: bool,
) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> =
        inputs.iter().map(|t| if track { tape.input(t.clone()) } else { tape.constant(t.clone()) }.unwrap()).collect();
    let out = f(&mut tape, &vars).unwrap();
    assert_eq!(tape.shape(out), weights.shape.as_slice(), "weights must match the output shape");
    let w = tape.constant(weights.clone()).unwrap();
    let prod = tape.mul(out, w).unwrap();
    let loss = tape.sum_all(prod).unwrap();
    let value = tape.value(loss).item();
    if !track {
        return (value, Vec::new());
    }
    let grads = tape.backward(loss).unwrap();
    let g = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(&t.shape)))
        .collect();
    (value, g)
}

/// Largest relative disagreement between the analytic gradient of
/// `sum(f(inputs) * w)` (random `w`) and central finite differences.
/// Relative error uses `max(|a|, |n|, 1e-3)` as denominator.
pub fn fd_max_rel_error(seed: u64, inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone()).unwrap()).collect();
    let probe = f(&mut tape, &vars).unwrap();
    let out_shape = tape.shape(probe).to_vec();
    let mut r = rng(seed ^ 0x5eed);
    let weights = uniform(&mut r, &out_shape, -1.0, 1.0);
    let (_, analytic) = scalar_loss(&f, inputs, &weights, true);
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data[i] -= FD_STEP;
            let (fp, _) = scalar_loss(&f, &plus, &weights, false);
            let (fm, _) = scalar_loss(&f, &minus, &weights, false);
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let a = analytic[k].data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

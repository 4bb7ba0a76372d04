//! Wall-clock cost of sampling as a function of the number of steps.

use std::time::Instant;

use anfm_model::{sample, AnfmModel, SampleMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub steps: usize,
    /// Median over repetitions of the mean seconds per graph.
    pub median: f64,
    /// Median absolute deviation of the same repetitions.
    pub mad: f64,
    pub repetitions: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Times `rollouts` sequential samples of `n` nodes for each step count, `reps`
/// times, after one untimed warmup rollout per step count.
pub fn bench_sampling(
    model: &AnfmModel,
    n: usize,
    steps_list: &[usize],
    rollouts: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, EvalError> {
    if rollouts == 0 || reps < 3 {
        return Err(EvalError::InvalidArgument("bench needs at least one rollout and three repetitions".into()));
    }
    let mut rows = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        if steps == 0 {
            return Err(EvalError::InvalidArgument("step counts must be positive".into()));
        }
        let mut m = model.clone();
        m.config.steps = steps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&m, n, &mut rng, SampleMode::Stochastic)?;
        let mut repetitions = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            for _ in 0..rollouts {
                sample(&m, n, &mut rng, SampleMode::Stochastic)?;
            }
            repetitions.push(start.elapsed().as_secs_f64() / rollouts as f64);
        }
        let med = median(&repetitions);
        let deviations: Vec<f64> = repetitions.iter().map(|r| (r - med).abs()).collect();
        rows.push(BenchRow { n, steps, median: med, mad: median(&deviations), repetitions });
    }
    Ok(rows)
}

/// `y = a + b x + c x^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        self.a + self.b * x + self.c * x * x
    }
}

/// Least-squares quadratic through `(x, y)` via the 3x3 normal equations.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<Quadratic, EvalError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(EvalError::InvalidArgument("quadratic fit needs at least three paired points".into()));
    }
    // Center and scale x for conditioning, then map the coefficients back.
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let scale = xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max).max(1e-300);
    let mut m = [[0.0; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let z = (x - mean) / scale;
        let basis = [1.0, z, z * z];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
            m[r][3] += basis[r] * y;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).expect("nonempty");
        if m[pivot][col].abs() < 1e-12 {
            return Err(EvalError::InvalidArgument("quadratic fit needs three distinct x values".into()));
        }
        m.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let (p0, p1, p2) = (m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]);
    // y = p0 + p1 (x - mean)/s + p2 (x - mean)^2/s^2
    let c = p2 / (scale * scale);
    let b = p1 / scale - 2.0 * mean * c;
    let a = p0 - p1 * mean / scale + c * mean * mean;
    Ok(Quadratic { a, b, c })
}

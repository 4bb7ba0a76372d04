//! Sampling variability of the evaluation estimators.

use anfm_graph::Graph;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptors::{descriptor_sets, DescriptorKind};
use crate::mmd::{mmd2, Kernel};
use crate::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub kind: DescriptorKind,
    pub size: usize,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// MMD of `repeats` subsets drawn without replacement from `pool` against
/// the full `reference`, for every size and descriptor.
pub fn estimator_study(
    pool: &[Graph],
    reference: &[Graph],
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<StudyRow>, EvalError> {
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if largest > pool.len() {
        return Err(EvalError::InsufficientSamples { needed: largest, have: pool.len() });
    }
    if reference.is_empty() || repeats == 0 || sizes.contains(&0) {
        return Err(EvalError::InvalidArgument("study needs a reference set, repeats and positive sizes".into()));
    }
    let mut rows = Vec::new();
    for kind in DescriptorKind::ALL {
        let (pool_desc, ref_desc) = descriptor_sets(kind, pool, reference);
        let kernel = Kernel::for_kind(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &size in sizes {
            let values = (0..repeats)
                .map(|_| {
                    let subset: Vec<Vec<f64>> =
                        sample_indices(&mut rng, pool.len(), size).iter().map(|i| pool_desc[i].clone()).collect();
                    Ok(mmd2(&subset, &ref_desc, kernel)?.value)
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            let (mean, std) = mean_std(&values);
            rows.push(StudyRow { kind, size, mean, std });
        }
    }
    Ok(rows)
}

/// Empirical standard deviation of the ratio of `n` Bernoulli(`p`) draws
/// over `repeats` simulated evaluations.
pub fn validity_std_monte_carlo(p: f64, n: usize, repeats: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratios: Vec<f64> =
        (0..repeats).map(|_| (0..n).filter(|_| rng.random::<f64>() < p).count() as f64 / n as f64).collect();
    mean_std(&ratios).1
}

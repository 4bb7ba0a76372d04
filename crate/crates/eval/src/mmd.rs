//! Biased (V-statistic) estimator of the squared MMD.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::DescriptorKind;
use crate::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-d^2 / (2 sigma^2))` with `d` the total-variation distance
    /// `||x - y||_1 / 2`.
    GaussianTv { sigma: f64 },
    /// `exp(-||x - y||_2^2 / (2 sigma^2))`.
    Rbf { sigma: f64 },
}

impl Kernel {
    /// Kernel conventionally paired with each descriptor.
    pub fn for_kind(kind: DescriptorKind) -> Self {
        match kind {
            DescriptorKind::Degree => Kernel::GaussianTv { sigma: 1.0 },
            DescriptorKind::Clustering => Kernel::GaussianTv { sigma: 0.1 },
            DescriptorKind::Spectral => Kernel::GaussianTv { sigma: 1.0 },
            DescriptorKind::Orbit => Kernel::Rbf { sigma: 30.0 },
        }
    }

    /// Vectors of different lengths are compared with zero padding.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let len = x.len().max(y.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        match *self {
            Kernel::GaussianTv { sigma } => {
                let d = (0..len).map(|i| (at(x, i) - at(y, i)).abs()).sum::<f64>() / 2.0;
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Rbf { sigma } => {
                let d2 = (0..len).map(|i| (at(x, i) - at(y, i)).powi(2)).sum::<f64>();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    pub value: f64,
    pub kernel: Kernel,
    pub n: usize,
    pub m: usize,
}

/// Mean of `k(a_i, b_j)` over all pairs. Terms are summed in sorted order, so
/// the result does not depend on which set comes first.
fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], kernel: &Kernel) -> f64 {
    let mut terms: Vec<f64> = a.par_iter().flat_map_iter(|x| b.iter().map(move |y| kernel.eval(x, y))).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// `M = mean k(x, x') + mean k(y, y') - 2 mean k(x, y)`, diagonal terms included.
pub fn mmd2(x: &[Vec<f64>], y: &[Vec<f64>], kernel: Kernel) -> Result<MmdResult, EvalError> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::Empty("mmd2 needs two nonempty descriptor sets".into()));
    }
    let value = mean_kernel(x, x, &kernel) + mean_kernel(y, y, &kernel) - 2.0 * mean_kernel(x, y, &kernel);
    Ok(MmdResult { value, kernel, n: x.len(), m: y.len() })
}

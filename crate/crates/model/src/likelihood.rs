//! Mixture-of-Bernoulli edge distributions and their log-likelihoods.

use anfm_graph::Edge;

/// Stand-in for `ln 0` when a component assigns zero probability to a
/// target; keeps downstream ratios finite.
pub const LOG_ZERO: f64 = -1e30;

/// `ln sigmoid(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    let z = -x;
    -(z.max(0.0) + (-z.abs()).exp().ln_1p())
}

/// Distribution over the edge set of one step: `sum_k pi_k prod_{i<j}
/// Bern(p_k(i, j))`, stored as log weights and symmetric pair log-odds.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDistribution {
    pub n: usize,
    pub log_pi: Vec<f64>,
    /// `K` row-major `(n, n)` blocks of log-odds; the diagonal is unused.
    pub logits: Vec<f64>,
}

impl EdgeDistribution {
    /// Builds a distribution from probabilities; `p` holds `K` blocks of
    /// `(n, n)` entries, of which only `i < j` are read.
    pub fn from_probabilities(pi: &[f64], p: &[f64], n: usize) -> Self {
        assert_eq!(p.len(), pi.len() * n * n);
        let mut logits = vec![0.0; p.len()];
        for k in 0..pi.len() {
            for i in 0..n {
                for j in (i + 1)..n {
                    let x = p[k * n * n + i * n + j];
                    let l = (x / (1.0 - x)).ln();
                    logits[k * n * n + i * n + j] = l;
                    logits[k * n * n + j * n + i] = l;
                }
            }
        }
        Self { n, log_pi: pi.iter().map(|w| w.ln()).collect(), logits }
    }

    pub fn components(&self) -> usize {
        self.log_pi.len()
    }

    pub fn pi(&self) -> Vec<f64> {
        self.log_pi.iter().map(|l| l.exp()).collect()
    }

    /// `p_k(i, j)`; zero on the diagonal.
    pub fn probability(&self, k: usize, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let l = self.logits[k * self.n * self.n + i * self.n + j];
        if l >= 0.0 {
            1.0 / (1.0 + (-l).exp())
        } else {
            let e = l.exp();
            e / (1.0 + e)
        }
    }

    /// Log-likelihood of one component for a 0/1 target over pairs `i < j`.
    fn component_log_likelihood(&self, k: usize, target: &[bool]) -> f64 {
        let n = self.n;
        let block = &self.logits[k * n * n..(k + 1) * n * n];
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let l = block[i * n + j];
                acc += if target[i * n + j] { log_sigmoid(l) } else { log_sigmoid(-l) };
            }
        }
        acc
    }
}

/// Step log-likelihood and whether a zero-probability event was clamped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLogLik {
    pub value: f64,
    pub guarded: bool,
}

/// `ln sum_k pi_k prod_{i<j} Bern(p_k(i, j))` as a log-sum-exp over
/// components; no products of probabilities are formed.
pub fn step_log_likelihood(dist: &EdgeDistribution, target: &[Edge]) -> StepLogLik {
    let n = dist.n;
    let mut adj = vec![false; n * n];
    for &(i, j) in target {
        assert!(i != j, "self-loop in target");
        adj[i * n + j] = true;
        adj[j * n + i] = true;
    }
    let mut guarded = false;
    let terms: Vec<f64> = (0..dist.components())
        .map(|k| {
            let t = dist.log_pi[k] + dist.component_log_likelihood(k, &adj);
            if t.is_finite() {
                t
            } else {
                guarded = true;
                LOG_ZERO
            }
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    StepLogLik { value, guarded }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sigmoid_matches_direct_formula() {
        for x in [-30.0, -2.0, -0.1, 0.0, 0.5, 3.0, 40.0] {
            let direct = (1.0 / (1.0 + f64::exp(-x))).ln();
            assert!((log_sigmoid(x) - direct).abs() < 1e-12, "{x}");
        }
        assert_eq!(log_sigmoid(f64::INFINITY), 0.0);
        assert_eq!(log_sigmoid(f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_bernoulli_on_three_nodes() {
        let d = EdgeDistribution::from_probabilities(&[1.0], &[0.5; 9], 3);
        for target in [vec![], vec![(0, 1)], vec![(0, 1), (0, 2), (1, 2)]] {
            let l = step_log_likelihood(&d, &target);
            assert!((l.value + 3.0 * 2f64.ln()).abs() < 1e-12);
            assert!(!l.guarded);
        }
    }

    #[test]
    fn degenerate_mixture_uses_first_component() {
        let mut p = vec![0.3; 9];
        p.extend([0.9; 9]);
        let mixed = EdgeDistribution::from_probabilities(&[1.0, 0.0], &p, 3);
        let single = EdgeDistribution::from_probabilities(&[1.0], &p[..9], 3);
        let target = [(0, 2)];
        let a = step_log_likelihood(&mixed, &target);
        let b = step_log_likelihood(&single, &target);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!(a.guarded);
    }

    #[test]
    fn certain_but_wrong_is_guarded() {
        let d = EdgeDistribution::from_probabilities(&[1.0], &[1.0; 4], 2);
        let l = step_log_likelihood(&d, &[]);
        assert_eq!(l.value, LOG_ZERO);
        assert!(l.guarded);
        assert_eq!(step_log_likelihood(&d, &[(0, 1)]).value, 0.0);
    }
}

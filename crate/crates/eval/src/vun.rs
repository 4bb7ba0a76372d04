//! Validity, uniqueness and novelty of generated graphs.

use std::collections::HashSet;

use anfm_graph::wl::DEFAULT_WL_ROUNDS;
use anfm_graph::{wl_hash, Graph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VunReport {
    pub samples: usize,
    pub valid: f64,
    /// Fraction of samples whose hash does not occur earlier in the list.
    pub unique: f64,
    /// Fraction of samples whose hash is absent from the training set.
    pub novel: f64,
    /// Fraction that is valid, unique and novel at once.
    pub vun: f64,
    /// `sqrt(V (1 - V) / n)` of the VUN ratio.
    pub std: f64,
}

/// Standard deviation of a ratio estimated from `n` independent samples.
pub fn validity_std(v: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (v * (1.0 - v) / n as f64).sqrt()
}

/// Graph identity is decided by Weisfeiler-Lehman hashes.
pub fn vun(samples: &[Graph], train: &[Graph], valid: impl Fn(&Graph) -> bool + Sync) -> VunReport {
    let n = samples.len();
    if n == 0 {
        return VunReport { samples: 0, valid: 0.0, unique: 0.0, novel: 0.0, vun: 0.0, std: 0.0 };
    }
    let train_hashes: HashSet<_> = train.par_iter().map(|g| wl_hash(g, DEFAULT_WL_ROUNDS)).collect();
    let scored: Vec<_> = samples.par_iter().map(|g| (wl_hash(g, DEFAULT_WL_ROUNDS), valid(g))).collect();
    let mut seen = HashSet::new();
    let (mut valid_count, mut unique, mut novel, mut all) = (0, 0, 0, 0);
    for (hash, ok) in scored {
        let is_unique = seen.insert(hash);
        let is_novel = !train_hashes.contains(&hash);
        valid_count += ok as usize;
        unique += is_unique as usize;
        novel += is_novel as usize;
        all += (ok && is_unique && is_novel) as usize;
    }
    let frac = |c: usize| c as f64 / n as f64;
    VunReport {
        samples: n,
        valid: frac(valid_count),
        unique: frac(unique),
        novel: frac(novel),
        vun: frac(all),
        std: validity_std(frac(all), n),
    }
}

//! Weisfeiler-Lehman color refinement hashing for deduplication.
//!
//! Colors are 64-bit values refined by hashing a node's color together with
//! the sorted multiset of its neighbors' colors. The digest folds in the
//! sorted color multiset of every round, so it is invariant under node
//! relabeling. Non-isomorphic graphs can collide (for example every pair of
//! regular graphs with equal degree and size); uniqueness counts built on this
//! hash are therefore conservative.

use crate::graph::Graph;

pub const DEFAULT_WL_ROUNDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphHash {
    pub digest: u64,
    pub rounds: usize,
}

fn mix(mut h: u64, x: u64) -> u64 {
    h ^= x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = (h ^ (h >> 33)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    (h ^ (h >> 33)).wrapping_mul(0xC4CE_B9FE_1A85_EC53)
}

fn multiset_digest(colors: &[u64], seed: u64) -> u64 {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.into_iter().fold(mix(seed, colors.len() as u64), mix)
}

pub fn wl_hash(g: &Graph, rounds: usize) -> GraphHash {
    assert!(rounds >= 1, "WL hashing needs at least one round");
    let n = g.n();
    let mut colors: Vec<u64> = (0..n).map(|v| mix(0x5151, g.degree(v) as u64)).collect();
    let mut digest = mix(multiset_digest(&colors, 0), g.num_edges() as u64);
    let mut buf = Vec::new();
    for round in 0..rounds {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                buf.clear();
                buf.extend(g.neighbors(v).iter().map(|&w| colors[w]));
                buf.sort_unstable();
                buf.iter().fold(mix(colors[v], round as u64 + 1), |h, &c| mix(h, c))
            })
            .collect();
        colors = next;
        digest = mix(digest, multiset_digest(&colors, round as u64 + 1));
    }
    GraphHash { digest, rounds }
}

use std::collections::HashMap;

use statrs::distribution::{Binomial, DiscreteCDF};

use super::{Family, SbmParams};
use crate::algo::{is_connected, is_lobster};
use crate::graph::Graph;
use crate::planarity::is_planar;

/// Passes of single-node moves after the greedy agglomeration.
const REFINEMENT_PASSES: usize = 100;
const INTERVAL_TAIL: f64 = 0.005;

/// Validity predicate of a family (SBM with default parameters).
pub fn valid(g: &Graph, family: Family) -> bool {
    match family {
        Family::Planar => is_connected(g) && is_planar(g),
        Family::Lobster => is_lobster(g),
        Family::Sbm => sbm_valid(g, &SbmParams::default()),
    }
}

/// Community labels from greedy modularity agglomeration: repeatedly merge
/// the pair of adjacent communities with the largest modularity gain while
/// it is positive. Labels are compacted to `0..k` in order of first appearance.
pub fn greedy_modularity_communities(g: &Graph) -> Vec<usize> {
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return (0..g.n()).collect();
    }
    let degree: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    agglomerate(g, degree, |links, da, db| links / m - da * db / (2.0 * m * m))
}

/// Scores of the planted-partition likelihood with known probabilities: a
/// node pair inside one community contributes `edge * alpha - beta` relative
/// to the same pair split across communities.
fn planted_scores(p: &SbmParams) -> (f64, f64) {
    let alpha = (p.p_intra * (1.0 - p.p_inter) / (p.p_inter * (1.0 - p.p_intra))).ln();
    let beta = ((1.0 - p.p_inter) / (1.0 - p.p_intra)).ln();
    (alpha, beta)
}

/// Planted partition for the generator's probabilities: greedy agglomeration
/// on the likelihood, single-node moves, then communities smaller than
/// `p.min_size` are dissolved into their best-scoring larger neighbor and the
/// moves repeated. The free-block-count likelihood favors stray low-degree
/// singletons; dissolving them stands in for a penalty on the block count.
pub fn planted_partition_communities(g: &Graph, p: &SbmParams) -> Vec<usize> {
    let (alpha, beta) = planted_scores(p);
    let mut label = agglomerate(g, vec![1.0; g.n()], |links, sa, sb| links * alpha - sa * sb * beta);
    refine(g, &mut label, alpha, beta);
    loop {
        let mut size = vec![0usize; g.n()];
        label.iter().for_each(|&l| size[l] += 1);
        let large: Vec<usize> = (0..g.n()).filter(|&c| size[c] >= p.min_size).collect();
        let smallest = (0..g.n()).filter(|&c| size[c] > 0 && size[c] < p.min_size).min_by_key(|&c| (size[c], c));
        let (Some(small), false) = (smallest, large.is_empty()) else { break };
        let members: Vec<usize> = (0..g.n()).filter(|&v| label[v] == small).collect();
        for v in members {
            let score = |c: usize| {
                let k_c = g.neighbors(v).iter().filter(|&&w| label[w] == c).count() as f64;
                k_c * alpha - size[c] as f64 * beta
            };
            let best = large.iter().copied().max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)));
            let best = best.expect("nonempty");
            size[best] += 1;
            label[v] = best;
        }
        refine(g, &mut label, alpha, beta);
    }
    compact(&label)
}

/// Agglomerative merging of adjacent communities; `gain(links, wa, wb)`
/// scores a merge from the number of edges between the communities and their
/// accumulated node weights.
fn agglomerate(g: &Graph, weight: Vec<f64>, gain: impl Fn(f64, f64, f64) -> f64) -> Vec<usize> {
    let n = g.n();
    let mut label: Vec<usize> = (0..n).collect();
    let mut weight = weight;
    // links[a][b]: edges between communities a != b.
    let mut links: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    for &(a, b) in g.edges() {
        *links[a].entry(b).or_default() += 1.0;
        *links[b].entry(a).or_default() += 1.0;
    }
    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            let mut nbrs: Vec<(usize, f64)> = links[a].iter().filter(|(&b, _)| b > a).map(|(&b, &l)| (b, l)).collect();
            nbrs.sort_by_key(|&(b, _)| b);
            for (b, l) in nbrs {
                let score = gain(l, weight[a], weight[b]);
                if best.is_none_or(|(s0, _, _)| score > s0) {
                    best = Some((score, a, b));
                }
            }
        }
        let Some((score, a, b)) = best else { break };
        if score <= 0.0 {
            break;
        }
        alive[b] = false;
        weight[a] += weight[b];
        let moved: Vec<(usize, f64)> = links[b].drain().collect();
        for (c, l) in moved {
            links[c].remove(&b);
            if c != a {
                *links[a].entry(c).or_default() += l;
                *links[c].entry(a).or_default() += l;
            }
        }
        links[a].remove(&b);
        label.iter_mut().filter(|x| **x == b).for_each(|x| *x = a);
    }
    compact(&label)
}

/// Single-node moves between existing communities that increase the
/// planted-partition score, for at most `REFINEMENT_PASSES` sweeps.
fn refine(g: &Graph, label: &mut [usize], alpha: f64, beta: f64) {
    let n = g.n();
    let mut size = vec![0.0; n];
    for &l in label.iter() {
        size[l] += 1.0;
    }
    for _ in 0..REFINEMENT_PASSES {
        let mut moved = false;
        for v in 0..n {
            let own = label[v];
            let mut to: HashMap<usize, f64> = HashMap::new();
            for &w in g.neighbors(v) {
                *to.entry(label[w]).or_default() += 1.0;
            }
            let stay = to.get(&own).copied().unwrap_or(0.0) * alpha - (size[own] - 1.0) * beta;
            let mut candidates: Vec<(usize, f64)> = to.into_iter().filter(|&(c, _)| c != own).collect();
            candidates.sort_by_key(|&(c, _)| c);
            let mut best = (own, stay);
            for (c, k_c) in candidates {
                let score = k_c * alpha - size[c] * beta;
                if score > best.1 + 1e-12 {
                    best = (c, score);
                }
            }
            if best.0 != own {
                size[own] -= 1.0;
                size[best.0] += 1.0;
                label[v] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

fn compact(label: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    label
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn within_binomial_interval(successes: u64, trials: u64, p: f64) -> bool {
    if trials == 0 {
        return true;
    }
    let dist = Binomial::new(p, trials).expect("valid binomial parameters");
    let lower_tail = dist.cdf(successes);
    let upper_tail = if successes == 0 { 1.0 } else { dist.sf(successes - 1) };
    lower_tail >= INTERVAL_TAIL && upper_tail >= INTERVAL_TAIL
}

/// Surrogate SBM validity: community count and sizes within the
/// generator's ranges and pooled intra/inter edge frequencies inside exact
/// 99% binomial intervals around the generator's probabilities.
pub fn sbm_valid(g: &Graph, params: &SbmParams) -> bool {
    if g.n() == 0 || !is_connected(g) {
        return false;
    }
    let label = planted_partition_communities(g, params);
    let k = label.iter().max().map_or(0, |&x| x + 1);
    if k < params.min_communities || k > params.max_communities {
        return false;
    }
    let mut sizes = vec![0u64; k];
    label.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().any(|&s| (s as usize) < params.min_size || (s as usize) > params.max_size) {
        return false;
    }
    let intra_pairs: u64 = sizes.iter().map(|&s| s * (s - 1) / 2).sum();
    let inter_pairs = g.num_pairs() as u64 - intra_pairs;
    let intra_edges = g.edges().iter().filter(|&&(a, b)| label[a] == label[b]).count() as u64;
    let inter_edges = g.num_edges() as u64 - intra_edges;
    within_binomial_interval(intra_edges, intra_pairs, params.p_intra)
        && within_binomial_interval(inter_edges, inter_pairs, params.p_inter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cliques_joined_by_an_edge_split_in_two() {
        let mut edges: Vec<(usize, usize)> = Graph::complete(5).edges().to_vec();
        edges.extend(Graph::complete(5).edges().iter().map(|&(a, b)| (a + 5, b + 5)));
        edges.push((0, 5));
        let g = Graph::new(10, edges).unwrap();
        let label = greedy_modularity_communities(&g);
        assert!(label[..5].iter().all(|&l| l == label[0]));
        assert!(label[5..].iter().all(|&l| l == label[5]));
        assert_ne!(label[0], label[5]);
    }

    #[test]
    fn binomial_interval_edges() {
        assert!(within_binomial_interval(30, 100, 0.3));
        assert!(!within_binomial_interval(60, 100, 0.3));
        assert!(!within_binomial_interval(5, 100, 0.3));
    }
}
